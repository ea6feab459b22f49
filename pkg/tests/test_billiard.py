import math

import numpy as np
import pytest

from flatdisk import billiard as billiard_module
from flatdisk.billiard import (
    BilliardState,
    BilliardTable,
    Period,
    batch_prefix_minima,
    detect_period,
    direction_grid,
    find_periodic_orbit,
    min_singular_distance,
    prefix_minima,
    trace,
)
from flatdisk.disk import build_disk, compute_cut_system, load_spec
from flatdisk.errors import StartsSingular, TraceError
from flatdisk.geometry import point_segment_distance

GENERIC_STARTS = [
    ("square", "S", (0.3, 0.4), math.sqrt(2)),
    ("equilateral_glue", "T", (0.3, 0.2), 1.0),
    ("right_isosceles_glue", "T", (0.3, 0.25), 2.0),
    ("two_squares", "A", (0.3, 0.6), 0.7),
]

# a square fan around a flat interior vertex; C touches A only at (1, 1)
FAN = {
    "id": "fan",
    "polygons": [
        {"id": "A", "vertices": [[0, 0], [2, 0], [1, 1]]},
        {"id": "B", "vertices": [[2, 0], [2, 2], [1, 1]]},
        {"id": "C", "vertices": [[2, 2], [1, 3], [0, 2], [1, 1]]},
        {"id": "D", "vertices": [[0, 2], [0, 0], [1, 1]]},
    ],
    "gluings": [
        {"a": ["A", 1], "b": ["B", 2]},
        {"a": ["B", 1], "b": ["C", 3]},
        {"a": ["C", 2], "b": ["D", 2]},
        {"a": ["D", 1], "b": ["A", 2]},
    ],
}


def _swap_sides(label: str) -> str:
    if label.endswith("^l"):
        return label[:-1] + "r"
    if label.endswith("^r"):
        return label[:-1] + "l"
    return label


def test_square_horizontal_orbit(make_table) -> None:
    table = make_table("square")
    traj = trace(table, BilliardState.from_angle("S", (0.5, 0.5), 0.0), max_events=4)
    assert traj.word == ("e2", "e4", "e2", "e4")
    assert [e.kind for e in traj.events] == ["reflection"] * 4
    assert [e.length for e in traj.events] == pytest.approx([0.5, 1.5, 2.5, 3.5])
    assert traj.termination.reason == "max_events"
    assert detect_period(traj) == Period(pytest.approx(2.0), 2)
    assert min_singular_distance(table, traj) == pytest.approx(0.5)


def test_max_length_truncates(make_table) -> None:
    table = make_table("square")
    traj = trace(table, BilliardState.from_angle("S", (0.5, 0.5), 0.0), max_length=0.3)
    assert traj.events == ()
    assert traj.termination.reason == "max_length"
    assert traj.length == pytest.approx(0.3)
    assert traj.end.position == pytest.approx((0.8, 0.5))


def test_singular_hit(make_table) -> None:
    table = make_table("equilateral_glue")
    start = (0.5, 0.3)
    theta = math.atan2(-start[1], -start[0])
    traj = trace(table, BilliardState.from_angle("T", start, theta))
    assert traj.termination.reason == "singular_hit"
    assert traj.termination.vertex == "x1"
    assert traj.length == pytest.approx(math.hypot(*start))
    assert min_singular_distance(table, traj) == 0.0


def test_two_squares_closed_geodesic(make_table) -> None:
    table = make_table("two_squares")
    traj = trace(table, BilliardState.from_angle("A", (0.5, 0.5), math.pi / 2), max_events=6)
    assert traj.word == ("a2^l", "a1^l") * 3
    assert all(e.kind == "cut" for e in traj.events)
    assert detect_period(traj) == Period(pytest.approx(2.0), 2)
    assert min_singular_distance(table, traj) == pytest.approx(0.5)


def test_boundary_vertex_passage(make_table) -> None:
    table = make_table("two_squares")
    start = (0.25, 0.5)
    theta = math.atan2(-start[1], -start[0])
    traj = trace(table, BilliardState.from_angle("A", start, theta), max_events=3)
    assert traj.word == ("a1^r", "e2", "a2^r")
    assert [e.kind for e in traj.events] == ["cut", "reflection", "cut"]
    assert traj.events[0].length == pytest.approx(traj.events[1].length)
    assert traj.events[1].face == "B"
    assert traj.events[1].point == pytest.approx((1.0, 0.0))
    assert traj.events[2].point == pytest.approx((0.5, 1.0))
    lengths = [e.length for e in traj.events]
    assert lengths == sorted(lengths)


def test_find_periodic_orbit_avoiding_boundary(make_table) -> None:
    table = make_table("two_squares")
    traj = find_periodic_orbit(
        table, [("A", (0.5, 0.5))], direction_grid(8), max_events=20, avoid_boundary=True
    )
    assert traj is not None
    assert traj.start.direction == pytest.approx((0.0, 1.0), abs=1e-12)
    assert not any(e.kind == "reflection" for e in traj.events)


def test_prefix_minima(make_table) -> None:
    table = make_table("square")
    start = BilliardState.from_angle("S", (0.5, 0.5), 0.0)
    minima = prefix_minima(table, start, [0.25, 1.0], max_events=10)
    assert minima == pytest.approx([math.hypot(0.25, 0.5), 0.5])


def test_prefix_minima_after_singular_hit(make_table) -> None:
    table = make_table("equilateral_glue")
    start = (0.5, 0.3)
    theta = math.atan2(-start[1], -start[0])
    minima = prefix_minima(table, BilliardState.from_angle("T", start, theta), [0.1, 10.0], 100)
    assert minima[0] > 0.0
    assert minima[1] == 0.0


def test_invalid_starts(make_table) -> None:
    table = make_table("equilateral_glue")
    with pytest.raises(StartsSingular):
        trace(table, BilliardState.from_angle("T", (0.0, 0.0), 0.5))
    with pytest.raises(TraceError):
        trace(table, BilliardState.from_angle("T", (2.0, 2.0), 0.5))
    with pytest.raises(TraceError):
        trace(table, BilliardState.from_angle("Q", (0.5, 0.3), 0.5))
    with pytest.raises(TraceError):
        trace(table, BilliardState("T", (0.5, 0.3), (0.0, 0.0)))
    with pytest.raises(TraceError):
        trace(table, BilliardState.from_angle("T", (0.5, 0.3), 0.5), max_events=0)


def test_detect_period_none_for_generic_slope(make_table) -> None:
    table = make_table("square")
    traj = trace(table, BilliardState.from_angle("S", (0.3, 0.4), math.sqrt(2)), max_events=1000)
    assert detect_period(traj) is None
    with pytest.raises(ValueError):
        detect_period(traj, tol=0.0)


def test_start_on_edge_heading_out(make_table) -> None:
    table = make_table("square")
    centre = trace(table, BilliardState.from_angle("S", (0.5, 0.5), 0.0), max_events=4)
    edge = trace(table, BilliardState.from_angle("S", (1.0, 0.5), 0.0), max_events=4)
    assert edge.events[0].kind == "reflection"
    assert edge.events[0].label == "e2"
    assert edge.events[0].length == 0.0
    assert edge.word == centre.word
    assert [e.length + 0.5 for e in edge.events] == pytest.approx([e.length for e in centre.events])


def test_start_on_cut_heading_out(make_table) -> None:
    table = make_table("two_squares")
    centre = trace(table, BilliardState.from_angle("A", (0.5, 0.5), -math.pi / 2), max_events=6)
    edge = trace(table, BilliardState.from_angle("A", (0.5, 0.0), -math.pi / 2), max_events=6)
    assert edge.events[0].kind == "cut"
    assert edge.events[0].length == 0.0
    assert edge.events[0].state.face == "B"
    assert edge.word == centre.word
    assert [e.length + 0.5 for e in edge.events] == pytest.approx([e.length for e in centre.events])


@pytest.mark.parametrize(("name", "face", "point", "theta"), GENERIC_STARTS)
def test_reversed_trajectory_retraces(make_table, name: str, face: str, point, theta: float) -> None:
    table = make_table(name)
    forward = trace(table, BilliardState.from_angle(face, point, theta), max_length=9.7)
    end = forward.end
    back = trace(table, BilliardState(end.face, end.position, (-end.direction[0], -end.direction[1])), max_length=9.7)
    assert forward.termination.reason == back.termination.reason == "max_length"
    assert back.word == tuple(_swap_sides(label) for label in reversed(forward.word))
    assert back.end.face == face
    assert back.end.position == pytest.approx(point, abs=1e-8)


@pytest.mark.parametrize(("name", "face", "point", "theta"), GENERIC_STARTS)
def test_reflection_is_specular_and_transfers_are_consistent(
    make_table, name: str, face: str, point, theta: float
) -> None:
    table = make_table(name)
    traj = trace(table, BilliardState.from_angle(face, point, theta), max_events=60)
    assert len(traj.events) == 60
    incoming = traj.start.direction
    for event in traj.events:
        info = table.faces[event.face].edges[event.edge]
        out = event.state.direction
        assert math.hypot(*out) == pytest.approx(1.0)
        if event.kind == "reflection":
            nx, ny = info.normal
            ux, uy = info.unit
            assert incoming[0] * nx + incoming[1] * ny > 0.0
            assert out[0] * nx + out[1] * ny == pytest.approx(-(incoming[0] * nx + incoming[1] * ny))
            assert out[0] * ux + out[1] * uy == pytest.approx(incoming[0] * ux + incoming[1] * uy)
            assert event.state.face == event.face
            assert event.state.position == pytest.approx(event.point)
        else:
            target_face, target_edge = info.target
            target = table.faces[target_face].edges[target_edge]
            assert event.state.face == target_face
            assert event.state.position == pytest.approx(info.transfer.apply(event.point), abs=1e-12)
            assert out == pytest.approx(info.transfer.apply_vector(incoming), abs=1e-12)
            assert point_segment_distance(event.state.position, target.start, target.end) <= 1e-9
        incoming = out


def test_singular_points_across_a_shared_vertex() -> None:
    disk = build_disk(load_spec(FAN))
    table = BilliardTable.build(disk, compute_cut_system(disk))
    nearby = table.faces["A"].nearby_singular
    assert any(math.dist(p, (1.0, 3.0)) <= 1e-9 for p in nearby)
    assert all(any(math.dist(p, q) <= 1e-9 for p in nearby) for q in [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])
    assert not any(math.dist(p, (1.0, 1.0)) <= 1e-9 for p in nearby)


@pytest.mark.parametrize(
    ("name", "face", "point"),
    [
        ("equilateral_glue", "T", (0.5, 0.3)),
        ("square", "S", (0.3, 0.4)),
        ("two_squares", "A", (0.25, 0.5)),
        ("equilateral_right_isosceles", "X", (0.3, 0.3)),
        ("hexagon_folds", "H", (1.0, 1.0)),
    ],
)
def test_batch_prefix_minima_matches_scalar(make_table, name: str, face: str, point) -> None:
    table = make_table(name)
    rng = np.random.default_rng(7)
    thetas = list(rng.uniform(0.0, 2 * math.pi, 24))
    # straight at the origin corner: a singular hit, or a vertex passage on two_squares
    thetas.append(math.atan2(-point[1], -point[0]))
    lengths = [1.0, 5.0, 20.0]
    batch = batch_prefix_minima(table, face, point, thetas, lengths, max_events=200)
    assert batch.shape == (len(thetas), len(lengths))
    for row, theta in zip(batch, thetas):
        scalar = prefix_minima(table, BilliardState.from_angle(face, point, theta), lengths, max_events=200)
        assert list(row) == pytest.approx(scalar, abs=1e-9)


def test_batch_hands_vertex_passages_to_the_scalar_walker(make_table, mocker) -> None:
    table = make_table("two_squares")
    spy = mocker.spy(billiard_module, "_resume_scalar")
    point = (0.25, 0.5)
    theta = math.atan2(-point[1], -point[0])
    batch = batch_prefix_minima(table, "A", point, [0.3, theta], [1.0, 3.0], max_events=50)
    assert spy.call_count == 1
    scalar = prefix_minima(table, BilliardState.from_angle("A", point, theta), [1.0, 3.0], max_events=50)
    assert list(batch[1]) == pytest.approx(scalar, abs=1e-12)


def test_batch_prefix_minima_rejects_bad_limits(make_table) -> None:
    table = make_table("square")
    with pytest.raises(TraceError):
        batch_prefix_minima(table, "S", (0.5, 0.5), [0.1], [], max_events=10)
    with pytest.raises(TraceError):
        batch_prefix_minima(table, "S", (0.5, 0.5), [0.1], [1.0], max_events=0)
    with pytest.raises(StartsSingular):
        batch_prefix_minima(table, "S", (0.0, 0.0), [0.1], [1.0], max_events=10)
