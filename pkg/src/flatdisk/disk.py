"""Flat disks presented by glued polygons.

Edge ``i`` of a polygon joins vertex ``i`` to vertex ``i + 1``. A gluing pairs two
edges by the orientation-reversing isometry, so vertex ``i`` of one edge meets
vertex ``j + 1`` of its partner ``j``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping

import networkx as nx
import numpy as np

from .config import Tolerances, with_disk_overrides
from .errors import (
    AngleAssertionFailed,
    ConsistencyError,
    CutRoutingFailed,
    EdgeLengthMismatch,
    GaussBonnetViolation,
    InvalidCutSystem,
    NonOrientable,
    NotADisk,
    NotRational,
    SpecError,
)
from .geometry import (
    TWO_PI,
    PlanarIsometry,
    Point,
    RationalAngle,
    corner_angle,
    normalize_angle,
    polygon_area,
    rationalize,
    segments_intersect,
)
from .logging_utils import log_extra

log = logging.getLogger(__name__)

EdgeRef = tuple[str, int]
CornerRef = tuple[str, int]


@dataclass(frozen=True)
class Polygon:
    id: str
    vertices: tuple[Point, ...]

    @property
    def size(self) -> int:
        return len(self.vertices)

    def vertex(self, index: int) -> Point:
        return self.vertices[index % self.size]

    def edge(self, index: int) -> tuple[Point, Point]:
        return self.vertex(index), self.vertex(index + 1)

    def edge_length(self, index: int) -> float:
        a, b = self.edge(index)
        return math.dist(a, b)

    def corner_angle(self, index: int) -> float:
        return corner_angle(self.vertex(index - 1), self.vertex(index), self.vertex(index + 1))

    def area(self) -> float:
        return polygon_area(self.vertices)


@dataclass(frozen=True)
class AngleAssertion:
    vertex: CornerRef
    angle: RationalAngle


@dataclass(frozen=True)
class FlatDiskSpec:
    polygons: tuple[Polygon, ...]
    gluings: tuple[tuple[EdgeRef, EdgeRef], ...]
    declared_angles: tuple[AngleAssertion, ...] = ()
    marked_boundary_point: CornerRef | None = None
    cuts: tuple[tuple[EdgeRef, ...], ...] | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    disk_id: str = "disk"

    def polygon(self, polygon_id: str) -> Polygon:
        for polygon in self.polygons:
            if polygon.id == polygon_id:
                return polygon
        raise SpecError(f"Unknown polygon {polygon_id}")


@dataclass(frozen=True)
class VertexClass:
    index: int
    name: str
    corners: tuple[CornerRef, ...]
    angle: float
    rational: RationalAngle | None
    kind: Literal["interior", "boundary"]
    singular: bool

    @property
    def is_boundary(self) -> bool:
        return self.kind == "boundary"


@dataclass(frozen=True, eq=False)
class FlatDisk:
    spec: FlatDiskSpec
    polygons: Mapping[str, Polygon]
    vertex_classes: tuple[VertexClass, ...]
    corner_class: Mapping[CornerRef, int]
    partner: Mapping[EdgeRef, EdgeRef]
    boundary_cycle: tuple[EdgeRef, ...]
    area: float
    gauss_bonnet_residual: float

    @property
    def disk_id(self) -> str:
        return self.spec.disk_id

    @property
    def tolerances(self) -> Tolerances:
        return self.spec.tolerances

    @property
    def interior_singular(self) -> tuple[VertexClass, ...]:
        return tuple(c for c in self.vertex_classes if c.singular and not c.is_boundary)

    @property
    def boundary_singular(self) -> tuple[VertexClass, ...]:
        return tuple(c for c in self.vertex_classes if c.singular and c.is_boundary)

    @property
    def singular_classes(self) -> tuple[VertexClass, ...]:
        return tuple(c for c in self.vertex_classes if c.singular)

    def is_glued(self, edge: EdgeRef) -> bool:
        return edge in self.partner

    def class_of(self, corner: CornerRef) -> VertexClass:
        face, index = corner
        size = self.polygons[face].size
        return self.vertex_classes[self.corner_class[(face, index % size)]]

    def edge_classes(self, edge: EdgeRef) -> tuple[int, int]:
        face, index = edge
        return (
            self.class_of((face, index)).index,
            self.class_of((face, index + 1)).index,
        )

    def transfer(self, edge: EdgeRef) -> PlanarIsometry:
        """Chart change across a glued edge: the chart of ``edge`` to the chart of its partner."""
        face, index = edge
        other_face, other_index = self.partner[edge]
        v0, v1 = self.polygons[face].edge(index)
        w0, w1 = self.polygons[other_face].edge(other_index)
        return PlanarIsometry.from_segments((v0, v1), (w1, w0))

    def next_boundary_edge(self, edge: EdgeRef) -> tuple[EdgeRef, list[CornerRef]]:
        """The boundary edge following ``edge`` and the corners passed at their shared vertex."""
        return _next_unglued(self, edge, lambda e: not self.is_glued(e))


def _next_unglued(
    disk: FlatDisk, edge: EdgeRef, stops: Any
) -> tuple[EdgeRef, list[CornerRef]]:
    face, index = edge
    size = disk.polygons[face].size
    current = (face, (index + 1) % size)
    corners = [current]
    for _ in range(len(disk.corner_class) + 1):
        if stops(current):
            return current, corners
        other_face, other_index = disk.partner[current]
        other_size = disk.polygons[other_face].size
        current = (other_face, (other_index + 1) % other_size)
        corners.append(current)
    raise NotADisk(f"Vertex fan at the end of edge {edge} does not close")


# ---------------------------------------------------------------- loading


def _as_edge_ref(raw: Any, what: str) -> EdgeRef:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SpecError(f"{what} must be a [polygon id, index] pair")
    return str(raw[0]), int(raw[1])


def _parse_angle(raw: Any) -> RationalAngle:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise SpecError("pi_multiple must be a [num, den] pair")
    num, den = int(raw[0]), int(raw[1])
    if den <= 0:
        raise SpecError("pi_multiple denominator must be positive")
    return RationalAngle(num, den)


def _polygon_is_simple(vertices: tuple[Point, ...]) -> bool:
    n = len(vertices)
    for i in range(n):
        a0, a1 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if segments_intersect(a0, a1, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


def load_spec(source: str | Path | Mapping[str, Any], tolerances: Tolerances | None = None) -> FlatDiskSpec:
    """Parse a disk spec document (path, JSON text already decoded, or mapping)."""
    tolerances = tolerances or Tolerances()
    if isinstance(source, Mapping):
        raw = dict(source)
        default_id = "disk"
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise SpecError(f"Cannot read disk spec {path}") from exc
        except json.JSONDecodeError as exc:
            raise SpecError(f"Disk spec {path} is not valid JSON: {exc.msg}") from exc
        default_id = path.stem
    if not isinstance(raw, dict):
        raise SpecError("Disk spec must be a JSON object")
    try:
        return _parse_spec(raw, tolerances, default_id)
    except SpecError:
        raise
    except KeyError as exc:
        raise SpecError(f"Disk spec is missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise SpecError(f"Disk spec is malformed: {exc}") from exc


def _parse_spec(raw: Mapping[str, Any], tolerances: Tolerances, default_id: str) -> FlatDiskSpec:
    polygons_raw = raw["polygons"]
    polygons: list[Polygon] = []
    seen_ids: set[str] = set()
    for item in polygons_raw:
        poly_id = str(item["id"])
        if poly_id in seen_ids:
            raise SpecError(f"Duplicate polygon id {poly_id}")
        seen_ids.add(poly_id)
        vertices = tuple((float(x), float(y)) for x, y in item["vertices"])
        if len(vertices) < 3:
            raise SpecError(f"Polygon {poly_id} needs at least three vertices")
        if polygon_area(vertices) <= 0:
            raise SpecError(f"Polygon {poly_id} is not counterclockwise")
        if not _polygon_is_simple(vertices):
            raise SpecError(f"Polygon {poly_id} is not simple")
        polygons.append(Polygon(poly_id, vertices))
    sizes = {p.id: p.size for p in polygons}

    def checked(ref: EdgeRef, what: str) -> EdgeRef:
        if ref[0] not in sizes or not 0 <= ref[1] < sizes[ref[0]]:
            raise SpecError(f"{what} {list(ref)} does not exist")
        return ref

    gluings: list[tuple[EdgeRef, EdgeRef]] = []
    used: set[EdgeRef] = set()
    for item in raw.get("gluings", []):
        a = checked(_as_edge_ref(item.get("a"), "gluing edge"), "Edge")
        b = checked(_as_edge_ref(item.get("b"), "gluing edge"), "Edge")
        if str(item.get("orientation", "reversing")).lower() != "reversing":
            raise NonOrientable(f"Gluing {list(a)} ~ {list(b)} preserves orientation")
        for ref in (a, b):
            if ref in used:
                raise SpecError(f"Edge {list(ref)} appears in more than one gluing")
            used.add(ref)
        if a == b:
            raise SpecError(f"Edge {list(a)} is glued to itself")
        gluings.append((a, b))

    declared = tuple(
        AngleAssertion(
            checked(_as_edge_ref(item["vertex"], "angle vertex"), "Vertex"),
            _parse_angle(item["pi_multiple"]),
        )
        for item in raw.get("angles", [])
    )
    marked = raw.get("marked_boundary")
    marked_ref = checked(_as_edge_ref(marked, "marked_boundary"), "Vertex") if marked else None
    cuts_raw = raw.get("cuts")
    cuts = None
    if cuts_raw is not None:
        cuts = tuple(
            tuple(checked(_as_edge_ref(e, "cut edge"), "Edge") for e in path) for path in cuts_raw
        )

    return FlatDiskSpec(
        polygons=tuple(polygons),
        gluings=tuple(gluings),
        declared_angles=declared,
        marked_boundary_point=marked_ref,
        cuts=cuts,
        tolerances=with_disk_overrides(tolerances, raw.get("tolerances")),
        disk_id=str(raw.get("id", default_id)),
    )


# ---------------------------------------------------------------- build_disk


def _try_rationalize(angle: float, tol: Tolerances) -> RationalAngle | None:
    try:
        return rationalize(angle, tol.max_den, tol.rational_tol)
    except NotRational:
        return None


def _gauss_bonnet(entries: Iterable[tuple[str, float, RationalAngle | None]]) -> tuple[float, Fraction | None]:
    """Residual of sum(2π-θ) + sum(π-θ) - 2π, numerically and exactly when possible."""
    numeric = -TWO_PI
    exact: Fraction | None = Fraction(-2)
    for kind, angle, rational in entries:
        base = TWO_PI if kind == "interior" else math.pi
        numeric += base - angle
        if exact is not None and rational is not None:
            exact += (2 if kind == "interior" else 1) - rational.as_fraction()
        else:
            exact = None
    return numeric, exact


def build_disk(spec: FlatDiskSpec) -> FlatDisk:
    tol = spec.tolerances
    polygons = {p.id: p for p in spec.polygons}
    partner: dict[EdgeRef, EdgeRef] = {}
    for a, b in spec.gluings:
        la, lb = polygons[a[0]].edge_length(a[1]), polygons[b[0]].edge_length(b[1])
        if abs(la - lb) > tol.geom:
            raise EdgeLengthMismatch(
                f"Glued edges {list(a)} and {list(b)} have lengths {la:.12g} and {lb:.12g}"
            )
        partner[a] = b
        partner[b] = a

    corner_graph = nx.Graph()
    corner_graph.add_nodes_from((p.id, i) for p in spec.polygons for i in range(p.size))
    for a, b in spec.gluings:
        sa, sb = polygons[a[0]].size, polygons[b[0]].size
        corner_graph.add_edge((a[0], a[1]), (b[0], (b[1] + 1) % sb))
        corner_graph.add_edge((a[0], (a[1] + 1) % sa), (b[0], b[1]))

    boundary_edges = sorted(
        (p.id, i) for p in spec.polygons for i in range(p.size) if (p.id, i) not in partner
    )
    if not boundary_edges:
        raise NotADisk("The glued surface has no boundary")
    on_boundary: set[CornerRef] = set()
    for face, i in boundary_edges:
        on_boundary.add((face, i))
        on_boundary.add((face, (i + 1) % polygons[face].size))

    groups = sorted(sorted(group) for group in nx.connected_components(corner_graph))
    corner_class: dict[CornerRef, int] = {}
    provisional: list[tuple[tuple[CornerRef, ...], float, RationalAngle | None, str]] = []
    for index, group in enumerate(groups):
        for corner in group:
            corner_class[corner] = index
        angle = sum(polygons[f].corner_angle(i) for f, i in group)
        kind = "boundary" if any(c in on_boundary for c in group) else "interior"
        provisional.append((tuple(group), angle, _try_rationalize(angle, tol), kind))

    marked = spec.marked_boundary_point
    if marked is not None and provisional[corner_class[marked]][3] != "boundary":
        raise SpecError(f"marked_boundary {list(marked)} is not a boundary vertex")

    vertex_classes: list[VertexClass] = []
    counters = {"interior": 0, "boundary": 0, "regular": 0}
    for index, (corners, angle, rational, kind) in enumerate(provisional):
        flat = math.pi if kind == "boundary" else TWO_PI
        if rational is not None:
            singular = rational.as_fraction() != (1 if kind == "boundary" else 2)
        else:
            singular = abs(angle - flat) > tol.geom
        if singular:
            prefix = "y" if kind == "boundary" else "x"
            counters[kind] += 1
            name = f"{prefix}{counters[kind]}"
        else:
            counters["regular"] += 1
            name = f"v{counters['regular']}"
        vertex_classes.append(VertexClass(index, name, corners, angle, rational, kind, singular))

    disk = FlatDisk(
        spec=spec,
        polygons=polygons,
        vertex_classes=tuple(vertex_classes),
        corner_class=corner_class,
        partner=partner,
        boundary_cycle=(),
        area=sum(p.area() for p in spec.polygons),
        gauss_bonnet_residual=0.0,
    )

    euler = len(vertex_classes) - (len(spec.gluings) + len(boundary_edges)) + len(spec.polygons)
    if euler != 1:
        raise NotADisk(f"Euler characteristic of the glued complex is {euler}, expected 1")

    cycle = [boundary_edges[0]]
    while True:
        nxt, _ = disk.next_boundary_edge(cycle[-1])
        if nxt == cycle[0]:
            break
        if nxt in cycle or len(cycle) > len(boundary_edges):
            raise NotADisk("Boundary edges do not form a single cycle")
        cycle.append(nxt)
    if len(cycle) != len(boundary_edges):
        raise NotADisk("Boundary edges do not form a single cycle")
    _check_vertex_links(disk)

    numeric, exact = _gauss_bonnet((c.kind, c.angle, c.rational) for c in vertex_classes)
    if (exact is not None and exact != 0) or abs(numeric) > tol.geom:
        raise GaussBonnetViolation(
            f"Gauss-Bonnet residual {numeric:.3e} (expected 0) for disk {spec.disk_id}"
        )
    _check_declared_angles(spec, vertex_classes, corner_class, tol)

    disk = FlatDisk(
        spec=spec,
        polygons=polygons,
        vertex_classes=tuple(vertex_classes),
        corner_class=corner_class,
        partner=partner,
        boundary_cycle=tuple(cycle),
        area=disk.area,
        gauss_bonnet_residual=numeric,
    )
    log.info(
        "Disk built",
        extra=log_extra(
            disk_id=spec.disk_id,
            vertex_classes=len(vertex_classes),
            interior_singular=len(disk.interior_singular),
            boundary_singular=len(disk.boundary_singular),
        ),
    )
    return disk


def _check_vertex_links(disk: FlatDisk) -> None:
    """Each vertex class must be a single fan (boundary) or a single cycle (interior)."""
    for vc in disk.vertex_classes:
        start = vc.corners[0]
        if vc.is_boundary:
            start = fan_start(disk, start)
        seen = {start}
        current = start
        while True:
            face, index = current
            size = disk.polygons[face].size
            incoming = (face, (index - 1) % size)
            if incoming not in disk.partner:
                break
            other_face, other_index = disk.partner[incoming]
            current = (other_face, other_index)
            if current == start:
                break
            if current in seen:
                raise NotADisk(f"Vertex {vc.name} has a pinched neighbourhood")
            seen.add(current)
        if len(seen) != len(vc.corners):
            raise NotADisk(f"Vertex {vc.name} has a pinched neighbourhood")


def fan_start(disk: FlatDisk, corner: CornerRef) -> CornerRef:
    """Rotate clockwise from ``corner`` until the corner's outgoing edge is on the boundary."""
    current = corner
    for _ in range(len(disk.corner_class) + 1):
        if current not in disk.partner:
            return current
        other_face, other_index = disk.partner[current]
        size = disk.polygons[other_face].size
        current = (other_face, (other_index + 1) % size)
    raise NotADisk(f"Corner {corner} is not on the boundary")


def _check_declared_angles(
    spec: FlatDiskSpec,
    classes: list[VertexClass],
    corner_class: Mapping[CornerRef, int],
    tol: Tolerances,
) -> None:
    if not spec.declared_angles:
        return
    declared: dict[int, RationalAngle] = {}
    for assertion in spec.declared_angles:
        declared[corner_class[assertion.vertex]] = assertion.angle
    numeric, exact = _gauss_bonnet(
        (
            c.kind,
            declared[c.index].to_radians() if c.index in declared else c.angle,
            declared[c.index] if c.index in declared else c.rational,
        )
        for c in classes
    )
    if (exact is not None and exact != 0) or abs(numeric) > tol.geom:
        raise GaussBonnetViolation(
            f"Declared angles violate Gauss-Bonnet (residual {numeric:.6g})"
        )
    for index, angle in sorted(declared.items()):
        computed = classes[index].angle
        if abs(computed - angle.to_radians()) > tol.geom:
            raise AngleAssertionFailed(
                f"Vertex {classes[index].name} has angle {computed:.9f}, declared {angle}"
            )


# ---------------------------------------------------------------- cut systems


@dataclass(frozen=True)
class DirectedEdge:
    """A glued skeleton edge, named by its smaller side, traversed forward or backward."""

    face: str
    edge: int
    forward: bool

    @property
    def ref(self) -> EdgeRef:
        return (self.face, self.edge)


@dataclass(frozen=True)
class CutPath:
    index: int
    source: int
    target: int
    edges: tuple[DirectedEdge, ...]

    @property
    def name(self) -> str:
        return f"a{self.index}"


@dataclass(frozen=True)
class BoundarySegment:
    label: str
    edges: tuple[EdgeRef, ...]


@dataclass(frozen=True, eq=False)
class CutSystem:
    paths: tuple[CutPath, ...]
    segments: tuple[BoundarySegment, ...]
    cut_sides: Mapping[EdgeRef, tuple[int, bool]] = field(default_factory=dict)
    segment_of: Mapping[EdgeRef, str] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.paths)

    def cut_at(self, edge: EdgeRef) -> tuple[int, bool] | None:
        """(path index, cut runs along the edge direction) for either side of a cut edge."""
        return self.cut_sides.get(edge)


def _representative(disk: FlatDisk, edge: EdgeRef) -> EdgeRef:
    return min(edge, disk.partner[edge])


def _skeleton(disk: FlatDisk) -> nx.MultiGraph:
    """Vertex classes joined by one edge per glued pair, keyed by the pair's smaller side."""
    graph = nx.MultiGraph()
    graph.add_nodes_from(c.index for c in disk.vertex_classes)
    for edge in sorted(disk.partner):
        if edge != _representative(disk, edge):
            continue
        start, end = disk.edge_classes(edge)
        graph.add_edge(start, end, key=edge, length=disk.polygons[edge[0]].edge_length(edge[1]))
    return graph


def _directed(disk: FlatDisk, graph: nx.MultiGraph, start: int, end: int) -> DirectedEdge:
    _, face, index = min((data["length"], *key) for key, data in graph[start][end].items())
    return DirectedEdge(face, index, disk.edge_classes((face, index))[0] == start)


def _shortest_path(
    disk: FlatDisk,
    graph: nx.MultiGraph,
    source: int,
    targets: set[int],
    passable: set[int],
) -> tuple[float, list[DirectedEdge], int] | None:
    inner = passable | {source}
    reachable = inner | targets

    def usable(u: int, v: int, key: EdgeRef) -> bool:
        return (u in inner or v in inner) and u in reachable and v in reachable

    view = nx.subgraph_view(graph, filter_edge=usable)
    lengths = nx.single_source_dijkstra_path_length(view, source, weight="length")
    reached = sorted((round(dist, 12), node) for node, dist in lengths.items() if node in targets)
    if not reached:
        return None
    dist, target = reached[0]
    nodes = min(nx.all_shortest_paths(view, source, target, weight="length"))
    return dist, [_directed(disk, graph, u, v) for u, v in zip(nodes, nodes[1:])], target


def _route(disk: FlatDisk, targets: set[int]) -> list[tuple[int, list[DirectedEdge], int]] | None:
    graph = _skeleton(disk)
    free = {c.index for c in disk.vertex_classes if not c.is_boundary and not c.singular}
    order = []
    for vc in disk.interior_singular:
        found = _shortest_path(disk, graph, vc.index, targets, free)
        order.append((found[0] if found else math.inf, vc.index))
    routed = []
    for _, source in sorted(order):
        found = _shortest_path(disk, graph, source, targets, free)
        if found is None:
            return None
        _, path, target = found
        for edge in path:
            start, end = disk.edge_classes(edge.ref)
            free.discard(start)
            free.discard(end)
        routed.append((source, path, target))
    routed.sort(key=lambda item: item[0])
    return routed


def compute_cut_system(disk: FlatDisk) -> CutSystem:
    """Interior-disjoint skeleton paths from every interior singular point to the boundary."""
    if disk.spec.cuts is not None:
        return _explicit_cut_system(disk, disk.spec.cuts)
    if not disk.interior_singular:
        return _finish_cut_system(disk, [])
    marked = disk.spec.marked_boundary_point
    preferred = {c.index for c in disk.boundary_singular}
    if marked is not None:
        preferred.add(disk.class_of(marked).index)
    if not preferred:
        preferred = {min(c.index for c in disk.vertex_classes if c.is_boundary)}
    routed = _route(disk, preferred)
    if routed is None:
        every = {c.index for c in disk.vertex_classes if c.is_boundary}
        routed = _route(disk, every)
    if routed is None:
        raise CutRoutingFailed(
            "No interior-disjoint cut system exists in the 1-skeleton; refine the polygons"
        )
    return _finish_cut_system(disk, routed)


def _explicit_cut_system(disk: FlatDisk, raw_paths: tuple[tuple[EdgeRef, ...], ...]) -> CutSystem:
    interior_singular = {c.index for c in disk.interior_singular}
    used: set[int] = set()
    routed: list[tuple[int, list[DirectedEdge], int]] = []
    for raw in raw_paths:
        if not raw:
            raise InvalidCutSystem("Cut paths must contain at least one edge")
        first = raw[0]
        if first not in disk.partner:
            raise InvalidCutSystem(f"Cut edge {list(first)} lies on the boundary")
        ends = disk.edge_classes(first)
        sources = [c for c in ends if c in interior_singular]
        if not sources:
            raise InvalidCutSystem(f"Cut starting with {list(first)} does not start at a singular point")
        source = sources[0]
        current = source
        visited = [source]
        path: list[DirectedEdge] = []
        for edge in raw:
            if edge not in disk.partner:
                raise InvalidCutSystem(f"Cut edge {list(edge)} lies on the boundary")
            start, end = disk.edge_classes(edge)
            if start == current:
                forward, current = True, end
            elif end == current:
                forward, current = False, start
            else:
                raise InvalidCutSystem(f"Cut edge {list(edge)} does not continue the path")
            rep = _representative(disk, edge)
            if rep != edge:
                forward = not forward
            path.append(DirectedEdge(rep[0], rep[1], forward))
            if current in visited:
                raise InvalidCutSystem("Cut paths must not intersect themselves")
            visited.append(current)
            if disk.vertex_classes[current].is_boundary and edge != raw[-1]:
                raise InvalidCutSystem("Cut paths may touch the boundary only at their end")
        if not disk.vertex_classes[current].is_boundary:
            raise InvalidCutSystem("Cut paths must end on the boundary")
        interior_nodes = set(visited[:-1])
        if interior_nodes & used:
            raise InvalidCutSystem("Cut paths must be disjoint away from the boundary")
        used |= interior_nodes
        routed.append((source, path, current))
    covered = sorted(source for source, _, _ in routed)
    if covered != sorted(interior_singular):
        raise InvalidCutSystem("Every interior singular point needs exactly one cut path")
    routed.sort(key=lambda item: item[0])
    return _finish_cut_system(disk, routed)


def _finish_cut_system(disk: FlatDisk, routed: list[tuple[int, list[DirectedEdge], int]]) -> CutSystem:
    paths = tuple(
        CutPath(i + 1, source, target, tuple(edges))
        for i, (source, edges, target) in enumerate(routed)
    )
    cut_sides: dict[EdgeRef, tuple[int, bool]] = {}
    for path in paths:
        for edge in path.edges:
            cut_sides[edge.ref] = (path.index, edge.forward)
            cut_sides[disk.partner[edge.ref]] = (path.index, not edge.forward)

    breakpoints = {c.index for c in disk.boundary_singular}
    breakpoints |= {path.target for path in paths}
    if disk.spec.marked_boundary_point is not None:
        breakpoints.add(disk.class_of(disk.spec.marked_boundary_point).index)
    cycle = list(disk.boundary_cycle)
    starts = [i for i, edge in enumerate(cycle) if disk.class_of(edge).index in breakpoints]
    if starts:
        cycle = cycle[starts[0]:] + cycle[: starts[0]]
    chains: list[list[EdgeRef]] = []
    for edge in cycle:
        if not chains or disk.class_of(edge).index in breakpoints:
            chains.append([])
        chains[-1].append(edge)
    segments = tuple(BoundarySegment(f"e{i + 1}", tuple(chain)) for i, chain in enumerate(chains))
    segment_of = {edge: seg.label for seg in segments for edge in seg.edges}
    log.info(
        "Cut system computed",
        extra=log_extra(disk_id=disk.disk_id, cuts=len(paths), boundary_segments=len(segments)),
    )
    return CutSystem(paths=paths, segments=segments, cut_sides=cut_sides, segment_of=segment_of)


# ---------------------------------------------------------------- cut and develop


@dataclass(frozen=True)
class CutEdge:
    """One boundary edge of D*, the bank of a polygon edge of D."""

    label: str
    face: str
    edge: int
    start: Point
    end: Point


@dataclass(frozen=True, eq=False)
class CutDisk:
    disk: FlatDisk
    cuts: CutSystem
    edges: tuple[CutEdge, ...]
    corner_angles: tuple[float, ...]
    corner_classes: tuple[int, ...]
    placements: Mapping[str, PlanarIsometry]
    sigma: Mapping[int, PlanarIsometry]  # ai^r bank onto ai^l bank, linear angle -θ
    rho: Mapping[str, PlanarIsometry]
    chains: tuple[tuple[str, tuple[int, ...]], ...]
    injective: bool
    area: float
    edge_index: Mapping[EdgeRef, int] = field(default_factory=dict)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.chains)

    def label_of(self, face: str, edge: int) -> str | None:
        index = self.edge_index.get((face, edge))
        return None if index is None else self.edges[index].label

    def chart(self, face: str) -> PlanarIsometry:
        return self.placements[face]

    def vertices(self) -> np.ndarray:
        return np.array([e.start for e in self.edges], dtype=float)

    def bank_partner(self, index: int) -> int:
        """Index of the D* edge on the other bank of the cut edge ``index``."""
        edge = self.edges[index]
        return self.edge_index[self.disk.partner[(edge.face, edge.edge)]]

    def regluing(self, letter: str) -> PlanarIsometry:
        """The D*-intrinsic isometry composed on the right when crossing ``letter``."""
        if letter.startswith("e"):
            return self.rho[letter]
        name, side = letter.split("^")
        sigma = self.sigma[int(name[1:])]
        return sigma if side == "l" else sigma.inverse()


def _cut_label(cuts: CutSystem, edge: EdgeRef) -> str:
    index, forward = cuts.cut_sides[edge]
    return f"a{index}^{'l' if forward else 'r'}"


def cut_and_develop(disk: FlatDisk, cuts: CutSystem) -> CutDisk:
    tol = disk.tolerances

    def is_dstar_boundary(edge: EdgeRef) -> bool:
        return edge not in disk.partner or edge in cuts.cut_sides

    first = cuts.segments[0].edges[0]
    cycle: list[EdgeRef] = [first]
    angle_at_next: list[float] = []
    while True:
        nxt, corners = _next_unglued(disk, cycle[-1], is_dstar_boundary)
        angle_at_next.append(sum(disk.polygons[f].corner_angle(i) for f, i in corners))
        if nxt == first:
            break
        if len(cycle) > 2 * len(disk.corner_class):
            raise ConsistencyError("D* boundary walk does not close")
        cycle.append(nxt)
    corner_angles = [angle_at_next[-1]] + angle_at_next[:-1]

    adjacency = nx.Graph()
    adjacency.add_nodes_from(sorted(disk.polygons))
    for edge in sorted(disk.partner):
        other = disk.partner[edge]
        if edge in cuts.cut_sides or edge[0] == other[0] or adjacency.has_edge(edge[0], other[0]):
            continue
        adjacency.add_edge(edge[0], other[0], sides={edge[0]: edge, other[0]: other})
    placements: dict[str, PlanarIsometry] = {first[0]: PlanarIsometry.identity()}
    for face, other_face in nx.bfs_edges(adjacency, first[0]):
        other = adjacency.edges[face, other_face]["sides"][other_face]
        placements[other_face] = placements[face] @ disk.transfer(other)
    if len(placements) != len(disk.polygons):
        raise ConsistencyError("Cutting disconnected the disk")

    a0, a1 = disk.polygons[first[0]].edge(first[1])
    p0, p1 = placements[first[0]].apply(a0), placements[first[0]].apply(a1)
    normal = PlanarIsometry.from_segments((p0, p1), ((0.0, 0.0), (math.dist(p0, p1), 0.0)))
    placements = {face: normal @ iso for face, iso in sorted(placements.items())}

    for edge, other in disk.partner.items():
        if edge in cuts.cut_sides:
            continue
        v0, _ = disk.polygons[edge[0]].edge(edge[1])
        _, w1 = disk.polygons[other[0]].edge(other[1])
        if math.dist(placements[edge[0]].apply(v0), placements[other[0]].apply(w1)) > 1e3 * tol.geom:
            raise ConsistencyError("D* development is not flat; an interior singularity was left uncut")

    edges: list[CutEdge] = []
    for face, index in cycle:
        v0, v1 = disk.polygons[face].edge(index)
        label = _cut_label(cuts, (face, index)) if (face, index) in cuts.cut_sides else cuts.segment_of[(face, index)]
        edges.append(CutEdge(label, face, index, placements[face].apply(v0), placements[face].apply(v1)))
    edge_index = {(e.face, e.edge): i for i, e in enumerate(edges)}

    sigma: dict[int, PlanarIsometry] = {}
    for path in cuts.paths:
        theta = disk.vertex_classes[path.source].angle
        for directed in path.edges:
            ref = directed.ref
            other = disk.partner[ref]
            left, right = (ref, other) if directed.forward else (other, ref)
            candidate = (
                placements[left[0]] @ disk.transfer(right) @ placements[right[0]].inverse()
            )
            if path.index not in sigma:
                sigma[path.index] = candidate
            elif not sigma[path.index].is_close(candidate, 1e3 * tol.geom):
                raise ConsistencyError(f"Regluing isometry of cut a{path.index} is not unique")
        residual = normalize_angle(sigma[path.index].angle + theta)
        if min(residual, TWO_PI - residual) > 1e3 * tol.geom:
            raise ConsistencyError(f"Regluing of cut a{path.index} does not rotate by its cone angle")

    rho: dict[str, PlanarIsometry] = {}
    for segment in cuts.segments:
        ref = segment.edges[0]
        e = edges[edge_index[ref]]
        direction = math.atan2(e.end[1] - e.start[1], e.end[0] - e.start[0])
        rho[segment.label] = PlanarIsometry.reflection(direction, e.start)
        for other in segment.edges[1:]:
            oe = edges[edge_index[other]]
            if not (
                math.dist(rho[segment.label].apply(oe.start), oe.start) <= 1e3 * tol.geom
                and math.dist(rho[segment.label].apply(oe.end), oe.end) <= 1e3 * tol.geom
            ):
                raise ConsistencyError(f"Boundary segment {segment.label} is not straight")

    chains: list[tuple[str, list[int]]] = []
    for i, e in enumerate(edges):
        if chains and chains[-1][0] == e.label:
            chains[-1][1].append(i)
        else:
            chains.append((e.label, [i]))
    if len(chains) > 1 and chains[0][0] == chains[-1][0]:
        label, tail = chains.pop()
        chains[0] = (label, tail + chains[0][1])
    expected = 2 * cuts.m + len(cuts.segments)
    if len(chains) != expected:
        raise ConsistencyError(f"D* has {len(chains)} boundary chains, expected {expected}")

    vertices = [e.start for e in edges]
    injective = all(a < TWO_PI for a in corner_angles) and _polygon_is_simple(tuple(vertices))
    if not injective:
        log.warning(
            "D* development is not injective; rendering may overlap",
            extra=log_extra(disk_id=disk.disk_id),
        )
    corner_classes = tuple(disk.class_of((e.face, e.edge)).index for e in edges)
    return CutDisk(
        disk=disk,
        cuts=cuts,
        edges=tuple(edges),
        corner_angles=tuple(corner_angles),
        corner_classes=corner_classes,
        placements=placements,
        sigma=sigma,
        rho=rho,
        chains=tuple((label, tuple(idx)) for label, idx in chains),
        injective=injective,
        area=polygon_area(vertices),
        edge_index=edge_index,
    )
