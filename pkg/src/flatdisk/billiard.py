"""Billiard flow on a flat disk.

A trajectory is straight inside a polygon chart, changes chart through glued
edges and reflects specularly at unglued ones. The hot loop works on plain
float tuples; everything it needs is precomputed once in a ``BilliardTable``.
``batch_prefix_minima`` steps many directions from one point together on numpy
arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .disk import CutSystem, FlatDisk
from .errors import ConsistencyError, StartsSingular, TraceError
from .geometry import TWO_PI, PlanarIsometry, Point, cross, normalize_angle, point_segment_distance
from .logging_utils import log_extra

log = logging.getLogger(__name__)

EventKind = Literal["reflection", "cut", "seam"]
TerminationReason = Literal["max_events", "max_length", "singular_hit"]

_T_MIN = 1e-12
_VERTEX_GUARD = 1e-7


@dataclass(frozen=True)
class BilliardState:
    face: str
    position: Point
    direction: Point

    @classmethod
    def from_angle(cls, face: str, position: Sequence[float], theta: float) -> BilliardState:
        return cls(face, (float(position[0]), float(position[1])), (math.cos(theta), math.sin(theta)))

    def normalized(self) -> BilliardState:
        norm = math.hypot(*self.direction)
        if norm == 0.0:
            raise TraceError("Direction must be non-zero")
        return BilliardState(
            self.face, self.position, (self.direction[0] / norm, self.direction[1] / norm)
        )


@dataclass(frozen=True)
class Event:
    length: float
    kind: EventKind
    label: str | None
    face: str
    edge: int
    point: Point
    state: BilliardState


@dataclass(frozen=True)
class Segment:
    face: str
    start: Point
    end: Point
    length_start: float
    length_end: float


@dataclass(frozen=True)
class Termination:
    reason: TerminationReason
    vertex: str | None = None


@dataclass(frozen=True)
class Trajectory:
    start: BilliardState
    events: tuple[Event, ...]
    segments: tuple[Segment, ...]
    termination: Termination
    end: BilliardState
    length: float

    @property
    def word(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.events if e.kind != "seam" and e.label is not None)


@dataclass(frozen=True)
class Period:
    length: float
    events: int


@dataclass(frozen=True)
class _EdgeInfo:
    start: Point
    end: Point
    unit: Point
    normal: Point
    kind: Literal["boundary", "cut", "seam"]
    label: str | None
    cut_index: int | None
    cut_forward: bool
    target: tuple[str, int] | None
    transfer: PlanarIsometry | None


@dataclass(frozen=True)
class _FaceInfo:
    id: str
    vertices: tuple[Point, ...]
    edges: tuple[_EdgeInfo, ...]
    corner_angles: tuple[float, ...]
    corner_class: tuple[int, ...]
    singular_corners: tuple[int, ...]
    nearby_singular: tuple[Point, ...]


@dataclass(frozen=True, eq=False)
class _FaceArrays:
    """The per-face edge data of a table padded into rectangular arrays for batch stepping."""

    ids: tuple[str, ...]
    index: dict[str, int]
    start: np.ndarray
    vector: np.ndarray
    normal: np.ndarray
    valid: np.ndarray
    glued: np.ndarray
    target_face: np.ndarray
    target_edge: np.ndarray
    linear: np.ndarray
    shift: np.ndarray
    singular: np.ndarray

    @classmethod
    def from_faces(cls, faces: dict[str, _FaceInfo]) -> _FaceArrays:
        ids = tuple(faces)
        index = {face_id: i for i, face_id in enumerate(ids)}
        shape = (len(ids), max(len(f.edges) for f in faces.values()))
        depth = max([1] + [len(f.nearby_singular) for f in faces.values()])
        start, vector, normal, shift = (np.zeros(shape + (2,)) for _ in range(4))
        valid, glued = np.zeros(shape, dtype=bool), np.zeros(shape, dtype=bool)
        target_face, target_edge = np.full(shape, -1), np.full(shape, -1)
        linear = np.tile(np.eye(2), shape + (1, 1))
        singular = np.full((len(ids), depth, 2), np.nan)
        for i, face_id in enumerate(ids):
            info = faces[face_id]
            for k, edge in enumerate(info.edges):
                start[i, k] = edge.start
                vector[i, k] = (edge.end[0] - edge.start[0], edge.end[1] - edge.start[1])
                normal[i, k] = edge.normal
                valid[i, k] = True
                if edge.target is not None and edge.transfer is not None:
                    glued[i, k] = True
                    target_face[i, k] = index[edge.target[0]]
                    target_edge[i, k] = edge.target[1]
                    linear[i, k] = edge.transfer.matrix()
                    shift[i, k] = edge.transfer.translation
            if info.nearby_singular:
                singular[i, : len(info.nearby_singular)] = info.nearby_singular
        return cls(
            ids, index, start, vector, normal, valid, glued, target_face, target_edge, linear, shift, singular
        )


@dataclass(frozen=True)
class BilliardTable:
    """Per-face chart data for tracing; picklable so process pools can share it."""

    disk_id: str
    faces: dict[str, _FaceInfo]
    class_names: tuple[str, ...]
    class_boundary: tuple[bool, ...]
    hit_tol: float
    arrays: _FaceArrays = field(repr=False, compare=False)

    @classmethod
    def build(cls, disk: FlatDisk, cuts: CutSystem, hit_tol: float | None = None) -> BilliardTable:
        faces: dict[str, _FaceInfo] = {}
        for face_id, polygon in sorted(disk.polygons.items()):
            edges = []
            for k in range(polygon.size):
                a, b = polygon.edge(k)
                length = math.dist(a, b)
                unit = ((b[0] - a[0]) / length, (b[1] - a[1]) / length)
                normal = (unit[1], -unit[0])
                ref = (face_id, k)
                if ref not in disk.partner:
                    edges.append(
                        _EdgeInfo(a, b, unit, normal, "boundary", cuts.segment_of[ref], None, False, None, None)
                    )
                    continue
                side = cuts.cut_at(ref)
                kind = "cut" if side is not None else "seam"
                edges.append(
                    _EdgeInfo(
                        a,
                        b,
                        unit,
                        normal,
                        kind,
                        None,
                        side[0] if side else None,
                        side[1] if side else False,
                        disk.partner[ref],
                        disk.transfer(ref),
                    )
                )
            classes = tuple(disk.class_of((face_id, i)).index for i in range(polygon.size))
            singular = tuple(i for i in range(polygon.size) if disk.vertex_classes[classes[i]].singular)
            nearby = {polygon.vertex(i) for i in singular}
            for i in range(polygon.size):
                for other_face, chart in _vertex_star(disk, face_id, i):
                    other = disk.polygons[other_face]
                    for j in range(other.size):
                        if disk.class_of((other_face, j)).singular:
                            x, y = chart.apply(other.vertex(j))
                            nearby.add((round(x, 12), round(y, 12)))
            faces[face_id] = _FaceInfo(
                id=face_id,
                vertices=polygon.vertices,
                edges=tuple(edges),
                corner_angles=tuple(polygon.corner_angle(i) for i in range(polygon.size)),
                corner_class=classes,
                singular_corners=singular,
                nearby_singular=tuple(sorted(nearby)),
            )
        return cls(
            disk_id=disk.disk_id,
            faces=faces,
            class_names=tuple(c.name for c in disk.vertex_classes),
            class_boundary=tuple(c.is_boundary for c in disk.vertex_classes),
            hit_tol=disk.tolerances.hit if hit_tol is None else hit_tol,
            arrays=_FaceArrays.from_faces(faces),
        )

    def face(self, face_id: str) -> _FaceInfo:
        try:
            return self.faces[face_id]
        except KeyError as exc:
            raise TraceError(f"Unknown polygon {face_id}") from exc

    def singular_distance(self, face_id: str, a: Point, b: Point) -> float:
        points = self.faces[face_id].nearby_singular
        if not points:
            return math.inf
        return min(point_segment_distance(p, a, b) for p in points)


def _vertex_star(disk: FlatDisk, face: str, corner: int) -> list[tuple[str, PlanarIsometry]]:
    """Faces around vertex ``corner`` of ``face`` with their charts developed into the chart of ``face``.

    The walk turns clockwise through outgoing edges; a boundary vertex is
    finished by a counterclockwise walk. Returning to the start adds its holonomy image.
    """
    star: list[tuple[str, PlanarIsometry]] = []
    for outgoing in (True, False):
        current, chart = (face, corner), PlanarIsometry.identity()
        for _ in range(len(disk.corner_class)):
            h, c = current
            edge = (h, c) if outgoing else (h, (c - 1) % disk.polygons[h].size)
            if edge not in disk.partner:
                break
            g, j = disk.partner[edge]
            chart = chart @ disk.transfer((g, j))
            star.append((g, chart))
            current = (g, (j + 1) % disk.polygons[g].size) if outgoing else (g, j)
            if current == (face, corner):
                return star
    return star


def _contains(vertices: Sequence[Point], p: Point, tol: float) -> bool:
    n = len(vertices)
    inside = False
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        if point_segment_distance(p, a, b) <= tol:
            return True
        if (a[1] > p[1]) != (b[1] > p[1]):
            x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > p[0]:
                inside = not inside
    return inside


def _rotate(u: Point, angle: float) -> Point:
    c, s = math.cos(angle), math.sin(angle)
    return (c * u[0] - s * u[1], s * u[0] + c * u[1])


def _angle_from(u: Point, v: Point) -> float:
    return normalize_angle(math.atan2(v[1], v[0]) - math.atan2(u[1], u[0]))


class _Walk:
    """Mutable tracing state for one trajectory."""

    def __init__(
        self,
        table: BilliardTable,
        start: BilliardState,
        max_events: int,
        max_length: float,
        keep: bool,
        on_segment: Callable[[str, Point, Point, float, float], None] | None,
    ) -> None:
        self.table = table
        self.face = start.face
        self.pos = start.position
        self.dir = start.direction
        self.skip: tuple[int, ...] = ()
        self.length = 0.0
        self.max_events = max_events
        self.max_length = max_length
        self.keep = keep
        self.on_segment = on_segment
        self.events: list[Event] = []
        self.segments: list[Segment] = []
        self.count = 0

    def state(self) -> BilliardState:
        return BilliardState(self.face, self.pos, self.dir)

    def _segment(self, a: Point, b: Point, length: float) -> None:
        if self.keep:
            self.segments.append(Segment(self.face, a, b, self.length, self.length + length))
        if self.on_segment is not None:
            self.on_segment(self.face, a, b, self.length, self.length + length)

    def _event(self, kind: EventKind, label: str | None, face: str, edge: int, point: Point, state: BilliardState) -> None:
        self.count += 1
        if self.keep:
            self.events.append(Event(self.length, kind, label, face, edge, point, state))

    def _cut_label(self, info: _EdgeInfo, direction: Point) -> str:
        along = info.unit if info.cut_forward else (-info.unit[0], -info.unit[1])
        side = "l" if cross(along, direction) < 0 else "r"
        return f"a{info.cut_index}^{side}"

    def _cross_edge(self, face_id: str, k: int, point: Point, exit_dir: Point, new_state: BilliardState) -> None:
        info = self.table.faces[face_id].edges[k]
        if info.kind == "cut":
            self._event("cut", self._cut_label(info, exit_dir), face_id, k, point, new_state)
        else:
            self._event("seam", None, face_id, k, point, new_state)

    def _outward_edge(self, face: _FaceInfo, px: float, py: float, dx: float, dy: float, hit: float) -> int:
        """Edge the position lies on while the direction points out of the face, else -1."""
        for k, info in enumerate(face.edges):
            nx, ny = info.normal
            if dx * nx + dy * ny > 0.0 and point_segment_distance((px, py), info.start, info.end) <= hit:
                return k
        return -1

    def run(self) -> Termination:
        table = self.table
        hit = table.hit_tol
        while True:
            if self.count >= self.max_events:
                return Termination("max_events")
            face = table.faces[self.face]
            px, py = self.pos
            dx, dy = self.dir
            best_t, best_k = math.inf, -1
            for k, info in enumerate(face.edges):
                if k in self.skip:
                    continue
                ax, ay = info.start
                ex, ey = info.end[0] - ax, info.end[1] - ay
                denom = dx * ey - dy * ex
                if abs(denom) < 1e-15:
                    continue
                wx, wy = ax - px, ay - py
                t = (wx * ey - wy * ex) / denom
                s = (wx * dy - wy * dx) / denom
                if t > _T_MIN and -1e-9 <= s <= 1.0 + 1e-9 and t < best_t:
                    best_t, best_k = t, k
            if not self.skip:
                outward = self._outward_edge(face, px, py, dx, dy, hit)
                if outward >= 0:
                    best_t, best_k = 0.0, outward
            if best_k < 0:
                raise ConsistencyError(f"Trajectory lost its chart in polygon {self.face}")

            hit_t, hit_corner = math.inf, -1
            for i in face.singular_corners:
                vx, vy = face.vertices[i]
                along = (vx - px) * dx + (vy - py) * dy
                if along <= 0.0 or along > best_t + hit:
                    continue
                if abs((vx - px) * dy - (vy - py) * dx) <= hit and along < hit_t:
                    hit_t, hit_corner = along, i

            remaining = self.max_length - self.length
            stop_t = min(best_t, hit_t)
            if stop_t > remaining:
                end = (px + remaining * dx, py + remaining * dy)
                self._segment(self.pos, end, remaining)
                self.length = self.max_length
                self.pos = end
                return Termination("max_length")
            if hit_corner >= 0:
                end = face.vertices[hit_corner]
                self._segment(self.pos, end, hit_t)
                self.length += hit_t
                self.pos = end
                return Termination("singular_hit", table.class_names[face.corner_class[hit_corner]])

            point = (px + best_t * dx, py + best_t * dy)
            self._segment(self.pos, point, best_t)
            self.length += best_t
            info = face.edges[best_k]
            n = len(face.vertices)
            if math.dist(point, info.start) <= hit:
                self._pass_vertex(best_k, info.start)
            elif math.dist(point, info.end) <= hit:
                self._pass_vertex((best_k + 1) % n, info.end)
            elif info.kind == "boundary":
                nx, ny = info.normal
                dot = dx * nx + dy * ny
                self.dir = (dx - 2.0 * dot * nx, dy - 2.0 * dot * ny)
                self.pos = point
                self.skip = (best_k,)
                self._event("reflection", info.label, self.face, best_k, point, self.state())
            else:
                target_face, target_edge = info.target
                new_pos = info.transfer.apply(point)
                new_dir = info.transfer.apply_vector(self.dir)
                new_state = BilliardState(target_face, new_pos, new_dir)
                self._cross_edge(self.face, best_k, point, self.dir, new_state)
                self.face, self.pos, self.dir = target_face, new_pos, new_dir
                self.skip = (target_edge,)

    # vertex passage -------------------------------------------------------

    def _corner_unit(self, face_id: str, c: int) -> Point:
        return self.table.faces[face_id].edges[c].unit

    def _corner_angle(self, face_id: str, c: int) -> float:
        return self.table.faces[face_id].corner_angles[c]

    def _vertex(self, face_id: str, c: int) -> Point:
        return self.table.faces[face_id].vertices[c]

    def _pass_vertex(self, corner: int, point: Point) -> None:
        table = self.table
        face_id = self.face
        cls = table.faces[face_id].corner_class[corner]
        back = (-self.dir[0], -self.dir[1])
        alpha = min(_angle_from(self._corner_unit(face_id, corner), back), self._corner_angle(face_id, corner))
        current = (face_id, corner)
        if not table.class_boundary[cls]:
            target = normalize_angle(alpha + math.pi)
        else:
            beta = alpha
            while True:
                h, c = current
                info = table.faces[h].edges[c]
                if info.kind == "boundary":
                    break
                g, j = info.target
                nxt = (g, (j + 1) % len(table.faces[g].vertices))
                beta += self._corner_angle(*nxt)
                travel = _rotate(self._corner_unit(*nxt), beta + math.pi)
                self._cross_edge(h, c, self._vertex(h, c), info.normal, BilliardState(g, self._vertex(*nxt), travel))
                current = nxt
            h, c = current
            target = max(0.0, math.pi - beta)
            reflected = BilliardState(h, self._vertex(h, c), _rotate(self._corner_unit(h, c), target))
            self._event("reflection", table.faces[h].edges[c].label, h, c, self._vertex(h, c), reflected)
        offset = 0.0
        for _ in range(sum(len(f.vertices) for f in table.faces.values()) + 1):
            h, c = current
            width = self._corner_angle(h, c)
            if target <= offset + width + 1e-12:
                break
            n = len(table.faces[h].vertices)
            k = (c - 1) % n
            info = table.faces[h].edges[k]
            if info.kind == "boundary":
                break
            g, j = info.target
            offset += width
            travel = _rotate(self._corner_unit(g, j), target - offset)
            self._cross_edge(h, k, self._vertex(h, c), info.normal, BilliardState(g, self._vertex(g, j), travel))
            current = (g, j)
        h, c = current
        gamma = min(max(target - offset, 0.0), self._corner_angle(h, c))
        self.face = h
        self.pos = self._vertex(h, c)
        self.dir = _rotate(self._corner_unit(h, c), gamma)
        n = len(table.faces[h].vertices)
        self.skip = (c, (c - 1) % n)


def validate_start(table: BilliardTable, start: BilliardState) -> BilliardState:
    face = table.face(start.face)
    start = start.normalized()
    if not _contains(face.vertices, start.position, 1e-9):
        raise TraceError(f"Start point {start.position} is outside polygon {start.face}")
    for i in face.singular_corners:
        if math.dist(face.vertices[i], start.position) <= table.hit_tol:
            raise StartsSingular(f"Start point is the singular point {table.class_names[face.corner_class[i]]}")
    return start


def trace(
    table: BilliardTable,
    start: BilliardState,
    max_events: int = 1000,
    max_length: float = math.inf,
) -> Trajectory:
    if max_events <= 0 or max_length <= 0:
        raise TraceError("Trace limits must be positive")
    start = validate_start(table, start)
    walk = _Walk(table, start, max_events, max_length, keep=True, on_segment=None)
    termination = walk.run()
    log.debug(
        "Trajectory traced",
        extra=log_extra(disk_id=table.disk_id, events=walk.count, termination=termination.reason),
    )
    return Trajectory(
        start=start,
        events=tuple(walk.events),
        segments=tuple(walk.segments),
        termination=termination,
        end=walk.state(),
        length=walk.length,
    )


class _PrefixMinima:
    """Segment sink keeping the running singular distance and recording it at each threshold."""

    def __init__(
        self,
        table: BilliardTable,
        thresholds: Sequence[float],
        recorded: Sequence[float] = (),
        running: float = math.inf,
    ) -> None:
        self.table = table
        self.thresholds = thresholds
        self.out = list(recorded)
        self.running = running

    def __call__(self, face: str, a: Point, b: Point, s0: float, s1: float) -> None:
        thresholds, out = self.thresholds, self.out
        while len(out) < len(thresholds) and thresholds[len(out)] <= s1:
            cut = thresholds[len(out)]
            frac = 0.0 if s1 == s0 else (cut - s0) / (s1 - s0)
            partial = (a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1]))
            out.append(min(self.running, self.table.singular_distance(face, a, partial)))
        self.running = min(self.running, self.table.singular_distance(face, a, b))

    def finish(self, termination: Termination) -> list[float]:
        if termination.reason == "singular_hit":
            self.running = 0.0
        while len(self.out) < len(self.thresholds):
            self.out.append(self.running)
        return self.out


def prefix_minima(
    table: BilliardTable,
    start: BilliardState,
    lengths: Sequence[float],
    max_events: int,
) -> list[float]:
    """Minimum singular distance over each arc-length prefix, without keeping events."""
    thresholds = sorted(lengths)
    sink = _PrefixMinima(table, thresholds)
    start = validate_start(table, start)
    walk = _Walk(table, start, max_events, thresholds[-1], keep=False, on_segment=sink)
    return sink.finish(walk.run())


def _segment_distances(points: np.ndarray, ax: np.ndarray, ay: np.ndarray, bx: np.ndarray, by: np.ndarray) -> np.ndarray:
    """Row-wise minimum distance from segment ``a b`` to the row's points; nan points are padding."""
    vx, vy = (bx - ax)[:, None], (by - ay)[:, None]
    px, py = points[..., 0] - ax[:, None], points[..., 1] - ay[:, None]
    length_sq = vx * vx + vy * vy
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(length_sq > 0.0, (px * vx + py * vy) / length_sq, 0.0)
    t = np.clip(t, 0.0, 1.0)
    dist = np.hypot(t * vx - px, t * vy - py)
    return np.where(np.isnan(dist), np.inf, dist).min(axis=1)


def _resume_scalar(
    table: BilliardTable,
    state: BilliardState,
    skip: int,
    length: float,
    count: int,
    thresholds: Sequence[float],
    recorded: Sequence[float],
    running: float,
    max_events: int,
) -> list[float]:
    sink = _PrefixMinima(table, thresholds, recorded, running)
    walk = _Walk(table, state, max_events, thresholds[-1], keep=False, on_segment=sink)
    walk.length, walk.count = length, count
    walk.skip = (skip,) if skip >= 0 else ()
    return sink.finish(walk.run())


def batch_prefix_minima(
    table: BilliardTable,
    face: str,
    point: Sequence[float],
    thetas: Sequence[float] | np.ndarray,
    lengths: Sequence[float],
    max_events: int,
) -> np.ndarray:
    """``prefix_minima`` for many directions from one point, stepped together with numpy.

    Row ``i`` holds the minima for ``thetas[i]``. A direction whose next segment
    passes within ``_VERTEX_GUARD`` of a polygon vertex, or that finds no exit,
    continues on the scalar walker from its current state.
    """
    thresholds = sorted(float(t) for t in lengths)
    if not thresholds or max_events <= 0:
        raise TraceError("Trace limits must be positive")
    horizon = thresholds[-1]
    q = validate_start(table, BilliardState.from_angle(face, point, 0.0)).position
    arrays = table.arrays
    angles = [float(theta) for theta in thetas]
    n = len(angles)
    out = np.zeros((n, len(thresholds)))
    st = {
        "row": np.arange(n),
        "face": np.full(n, arrays.index[face]),
        "px": np.full(n, q[0]),
        "py": np.full(n, q[1]),
        "dx": np.array([math.cos(theta) for theta in angles]),
        "dy": np.array([math.sin(theta) for theta in angles]),
        "skip": np.full(n, -1),
        "length": np.zeros(n),
        "count": np.zeros(n, dtype=np.int64),
        "running": np.full(n, math.inf),
        "recorded": np.zeros(n, dtype=np.int64),
    }
    guard = max(_VERTEX_GUARD, 10.0 * table.hit_tol)
    slots = np.arange(arrays.start.shape[1])
    while st["row"].size:
        f, px, py, dx, dy = st["face"], st["px"], st["py"], st["dx"], st["dy"]
        ddx, ddy = dx[:, None], dy[:, None]
        wx, wy = arrays.start[f, :, 0] - px[:, None], arrays.start[f, :, 1] - py[:, None]
        ex, ey = arrays.vector[f, :, 0], arrays.vector[f, :, 1]
        denom = ddx * ey - ddy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex) / denom
            s = (wx * ddy - wy * ddx) / denom
        usable = (
            arrays.valid[f]
            & (np.abs(denom) >= 1e-15)
            & (t > _T_MIN)
            & (s >= -1e-9)
            & (s <= 1.0 + 1e-9)
            & (slots != st["skip"][:, None])
        )
        t = np.where(usable, t, math.inf)
        k = t.argmin(axis=1)
        best = t[np.arange(k.size), k]

        # vertices are the edge starts
        along = wx * ddx + wy * ddy
        perp = np.abs(wx * ddy - wy * ddx)
        near = arrays.valid[f] & (perp <= guard) & (along > -guard) & (along <= best[:, None] + guard)
        handoff = near.any(axis=1) | np.isinf(best)
        for i in np.flatnonzero(handoff):
            row, done = st["row"][i], st["recorded"][i]
            state = BilliardState(arrays.ids[f[i]], (float(px[i]), float(py[i])), (float(dx[i]), float(dy[i])))
            out[row] = _resume_scalar(
                table,
                state,
                int(st["skip"][i]),
                float(st["length"][i]),
                int(st["count"][i]),
                thresholds,
                out[row, :done].tolist(),
                float(st["running"][i]),
                max_events,
            )
        live = ~handoff
        best = np.where(live, best, 0.0)

        length = st["length"]
        ends = live & (best > horizon - length)
        seg = np.where(ends, horizon - length, best)
        bx, by = px + seg * dx, py + seg * dy
        s1 = np.where(ends, horizon, length + seg)
        points = arrays.singular[f]
        for j, mark in enumerate(thresholds):
            due = live & (st["recorded"] == j) & (mark <= s1)
            if not due.any():
                continue
            frac = (mark - length[due]) / (s1[due] - length[due])
            cx = px[due] + frac * (bx[due] - px[due])
            cy = py[due] + frac * (by[due] - py[due])
            partial = _segment_distances(points[due], px[due], py[due], cx, cy)
            out[st["row"][due], j] = np.minimum(st["running"][due], partial)
            st["recorded"][due] += 1
        running = np.minimum(st["running"], _segment_distances(points, px, py, bx, by))

        exit_x, exit_y = px + best * dx, py + best * dy
        glued = arrays.glued[f, k]
        nx, ny = arrays.normal[f, k, 0], arrays.normal[f, k, 1]
        dot = dx * nx + dy * ny
        m = arrays.linear[f, k]
        shift = arrays.shift[f, k]
        st.update(
            face=np.where(glued, arrays.target_face[f, k], f),
            skip=np.where(glued, arrays.target_edge[f, k], k),
            px=np.where(glued, m[:, 0, 0] * exit_x + m[:, 0, 1] * exit_y + shift[:, 0], exit_x),
            py=np.where(glued, m[:, 1, 0] * exit_x + m[:, 1, 1] * exit_y + shift[:, 1], exit_y),
            dx=np.where(glued, m[:, 0, 0] * dx + m[:, 0, 1] * dy, dx - 2.0 * dot * nx),
            dy=np.where(glued, m[:, 1, 0] * dx + m[:, 1, 1] * dy, dy - 2.0 * dot * ny),
            length=length + best,
            count=st["count"] + 1,
            running=running,
        )
        moving = live & ~ends
        capped = moving & (st["count"] >= max_events)
        for i in np.flatnonzero(capped):
            out[st["row"][i], st["recorded"][i]:] = running[i]
        keep = moving & ~capped
        st = {key: value[keep] for key, value in st.items()}
    return out


def min_singular_distance(table: BilliardTable, traj: Trajectory) -> float:
    if traj.termination.reason == "singular_hit":
        return 0.0
    if not traj.segments:
        return table.singular_distance(traj.start.face, traj.start.position, traj.start.position)
    return max(0.0, min(table.singular_distance(s.face, s.start, s.end) for s in traj.segments))


def detect_period(traj: Trajectory, tol: float = 1e-9) -> Period | None:
    """Smallest recurrence of the state right after the first event."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not traj.events:
        return None
    first = traj.events[0]
    ref = first.state
    for k, event in enumerate(traj.events[1:], start=1):
        state = event.state
        if (
            state.face == ref.face
            and math.dist(state.position, ref.position) <= tol
            and math.dist(state.direction, ref.direction) <= tol
        ):
            return Period(event.length - first.length, k)
    return None


def find_periodic_orbit(
    table: BilliardTable,
    starts: Iterable[tuple[str, Point]],
    directions: Iterable[float],
    max_events: int = 200,
    tol: float = 1e-9,
    avoid_boundary: bool = False,
) -> Trajectory | None:
    """Scan start points and directions for the first orbit that closes up within ``tol``."""
    angles = list(directions)
    for face, point in starts:
        for theta in angles:
            try:
                traj = trace(table, BilliardState.from_angle(face, point, theta), max_events=max_events)
            except StartsSingular:
                continue
            if avoid_boundary and any(e.kind == "reflection" for e in traj.events):
                continue
            if traj.termination.reason == "singular_hit":
                continue
            if detect_period(traj, tol) is not None:
                log.info(
                    "Periodic orbit found",
                    extra=log_extra(disk_id=table.disk_id, face=face, theta=theta),
                )
                return traj
    return None


def direction_grid(count: int) -> list[float]:
    return [TWO_PI * i / count for i in range(count)]
