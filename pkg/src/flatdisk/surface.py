"""The invariant translation surface of a rational flat disk.

Copies ``gD*`` of the cut disk are indexed by the elements ``g`` of the finite
dihedral group generated by the linear parts of the boundary reflections and
the cut regluings. Copies are glued by right multiplication:
``(g, e_j) ~ (g rho_j, e_j)`` and ``(g, a_i^r) ~ (g sigma_i^-1, a_i^l)``.
"""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

import networkx as nx
import numpy as np

from .disk import CutDisk, CutSystem, FlatDisk, cut_and_develop
from .errors import (
    ConsistencyError,
    EulerCharacteristicMismatch,
    IrrationalDisk,
    NonTranslationGluing,
)
from .geometry import TWO_PI, DihedralElement, RationalAngle, group_closure, polygon_area
from .logging_utils import log_extra

log = logging.getLogger(__name__)

_SNAP_TOL = 1e-6


@dataclass(frozen=True)
class ConeDatum:
    """Angle ``2π·num/den`` for interior points, ``π·num/den`` on the boundary."""

    name: str
    vertex_class: int
    num: int
    den: int


@dataclass(frozen=True)
class RationalityData:
    interior: tuple[ConeDatum, ...]
    boundary: tuple[ConeDatum, ...]
    l: int


def rationality_data(disk: FlatDisk) -> RationalityData:
    interior: list[ConeDatum] = []
    boundary: list[ConeDatum] = []
    for vc in disk.singular_classes:
        if vc.rational is None:
            raise IrrationalDisk(f"Angle {vc.angle:.9f} at {vc.name} is not a rational multiple of π")
        if vc.is_boundary:
            value = vc.rational.as_fraction()
            boundary.append(ConeDatum(vc.name, vc.index, value.numerator, value.denominator))
        else:
            value = vc.rational.as_fraction() / 2
            interior.append(ConeDatum(vc.name, vc.index, value.numerator, value.denominator))
    l = math.lcm(*(c.den for c in interior + boundary)) if interior or boundary else 1
    return RationalityData(tuple(interior), tuple(boundary), l)


@dataclass(frozen=True)
class DihedralGroup:
    l: int
    generators: tuple[DihedralElement, ...]
    elements: tuple[DihedralElement, ...]

    @property
    def order(self) -> int:
        return len(self.elements)


def build_group(disk: FlatDisk, cut_disk: CutDisk, data: RationalityData | None = None) -> DihedralGroup:
    data = data or rationality_data(disk)
    l = data.l
    generators = [
        DihedralElement.from_isometry(cut_disk.rho[label].linear(), l, _SNAP_TOL)
        for label in sorted(cut_disk.rho, key=lambda s: int(s[1:]))
    ]
    generators += [
        DihedralElement.from_isometry(cut_disk.sigma[i].linear(), l, _SNAP_TOL)
        for i in sorted(cut_disk.sigma)
    ]
    elements = tuple(group_closure(generators, l))
    if len(elements) != 2 * l:
        log.warning(
            "Group order differs from 2l",
            extra=log_extra(disk_id=disk.disk_id, order=len(elements), l=l),
        )
    return DihedralGroup(l, tuple(generators), elements)


@dataclass(frozen=True)
class SurfaceVertex:
    tokens: tuple[tuple[DihedralElement, int], ...]
    angle: float
    multiple: int


@dataclass(frozen=True, eq=False)
class TranslationSurface:
    cut_disk: CutDisk
    data: RationalityData
    group: DihedralGroup
    faces: Mapping[DihedralElement, np.ndarray]
    pairings: tuple[tuple[tuple[DihedralElement, int], tuple[DihedralElement, int]], ...]
    edge_names: tuple[str, ...]
    vertices: tuple[SurfaceVertex, ...]
    area: float

    @property
    def euler_characteristic(self) -> int:
        return euler_char_direct(self)

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def face_coordinates(self) -> list[tuple[str, np.ndarray]]:
        return [(g.label(), self.faces[g]) for g in self.group.elements]


def _edge_names(cut_disk: CutDisk) -> tuple[str, ...]:
    names = [""] * len(cut_disk.edges)
    for label, indices in cut_disk.chains:
        for pos, t in enumerate(indices):
            names[t] = label if len(indices) == 1 else f"{label}.{pos + 1}"
    return tuple(names)


def _partner(
    cut_disk: CutDisk,
    rho: Mapping[str, DihedralElement],
    sigma_inv: Mapping[int, DihedralElement],
    g: DihedralElement,
    t: int,
) -> tuple[DihedralElement, int] | None:
    """Face and edge glued to edge ``t`` of copy ``g``; None for left cut banks."""
    label = cut_disk.edges[t].label
    if label.startswith("e"):
        return g * rho[label], t
    name, side = label.split("^")
    if side == "l":
        return None
    return g * sigma_inv[int(name[1:])], cut_disk.bank_partner(t)


def build_invariant_surface(
    disk: FlatDisk, cuts: CutSystem, cut_disk: CutDisk | None = None
) -> TranslationSurface:
    cut_disk = cut_disk or cut_and_develop(disk, cuts)
    data = rationality_data(disk)
    group = build_group(disk, cut_disk, data)
    l = data.l
    rho = {
        label: DihedralElement.from_isometry(iso.linear(), l, _SNAP_TOL) for label, iso in cut_disk.rho.items()
    }
    sigma_inv = {
        i: DihedralElement.from_isometry(iso.linear(), l, _SNAP_TOL).inverse()
        for i, iso in cut_disk.sigma.items()
    }
    base = cut_disk.vertices()
    faces = {g: g.to_isometry().apply_many(base) for g in group.elements}
    n = len(base)
    scale = max(1.0, float(np.max(np.abs(base))))

    def oriented(g: DihedralElement, t: int) -> np.ndarray:
        coords = faces[g]
        vec = coords[(t + 1) % n] - coords[t]
        return -vec if g.flip else vec

    pairings = []
    seen: set[tuple[DihedralElement, int]] = set()
    for g in group.elements:
        for t in range(n):
            if (g, t) in seen:
                continue
            other = _partner(cut_disk, rho, sigma_inv, g, t)
            if other is None:
                continue
            if other[0] not in faces:
                raise ConsistencyError(f"Pairing leaves the group at {g.label()}")
            if (other[0], other[1]) in seen or other == (g, t):
                raise ConsistencyError(f"Edge {other[0].label()}:{other[1]} is paired twice")
            if not np.allclose(oriented(g, t), -oriented(*other), atol=1e-9 * scale, rtol=0.0):
                raise NonTranslationGluing(
                    f"Pairing {g.label()}:{t} ~ {other[0].label()}:{other[1]} is not a translation"
                )
            seen.add((g, t))
            seen.add(other)
            pairings.append(((g, t), other))
    if len(seen) != len(group.elements) * n:
        raise ConsistencyError("Some surface edges are left unpaired")

    vertices = _vertex_classes(cut_disk, group.elements, pairings)
    area = sum(abs(polygon_area(coords)) for coords in faces.values())
    surface = TranslationSurface(
        cut_disk=cut_disk,
        data=data,
        group=group,
        faces=faces,
        pairings=tuple(pairings),
        edge_names=_edge_names(cut_disk),
        vertices=vertices,
        area=area,
    )
    _check_connected(surface)
    log.info(
        "Invariant surface built",
        extra=log_extra(
            disk_id=disk.disk_id,
            l=l,
            group_order=group.order,
            chi=euler_char_direct(surface),
        ),
    )
    return surface


def _vertex_classes(
    cut_disk: CutDisk,
    elements: tuple[DihedralElement, ...],
    pairings: list[tuple[tuple[DihedralElement, int], tuple[DihedralElement, int]]],
) -> tuple[SurfaceVertex, ...]:
    n = len(cut_disk.edges)
    tokens = nx.Graph()
    tokens.add_nodes_from((g, t) for g in elements for t in range(n))
    for (g, t), (h, u) in pairings:
        if cut_disk.edges[t].label.startswith("e"):
            tokens.add_edge((g, t), (h, u))
            tokens.add_edge((g, (t + 1) % n), (h, (u + 1) % n))
        else:
            tokens.add_edge((g, t), (h, (u + 1) % n))
            tokens.add_edge((g, (t + 1) % n), (h, u))
    out = []
    for members in sorted(sorted(m) for m in nx.connected_components(tokens)):
        angle = sum(cut_disk.corner_angles[t] for _, t in members)
        multiple = round(angle / TWO_PI)
        if multiple < 1 or abs(angle - multiple * TWO_PI) > 1e-6:
            raise ConsistencyError(f"Cone angle {angle:.9f} is not a multiple of 2π")
        out.append(SurfaceVertex(tuple(members), angle, multiple))
    return tuple(out)


def _check_connected(surface: TranslationSurface) -> None:
    copies = nx.Graph()
    copies.add_nodes_from(surface.group.elements)
    copies.add_edges_from((g, h) for (g, _), (h, _) in surface.pairings)
    if not nx.is_connected(copies):
        raise ConsistencyError("Invariant surface is disconnected")


def euler_char_formula(data: RationalityData) -> int:
    l = data.l
    value = 2 * l
    value -= 2 * sum((l // c.den) * (c.den - 1) for c in data.interior)
    value -= sum((l // c.den) * (c.den - 1) for c in data.boundary)
    return value


def euler_char_direct(surface: TranslationSurface) -> int:
    faces = len(surface.faces)
    edges = len(surface.pairings)
    return len(surface.vertices) - edges + faces


def genus_from_chi(chi: int) -> int:
    if chi > 2 or chi % 2:
        raise ConsistencyError(f"Euler characteristic {chi} does not belong to a closed orientable surface")
    return (2 - chi) // 2


def check_euler(surface: TranslationSurface) -> int:
    formula = euler_char_formula(surface.data)
    direct = euler_char_direct(surface)
    if formula != direct:
        raise EulerCharacteristicMismatch(f"chi by formula {formula} differs from direct count {direct}")
    excess = sum(TWO_PI - v.angle for v in surface.vertices)
    if abs(excess - TWO_PI * direct) > 1e-6:
        raise ConsistencyError("Cone angles violate Gauss-Bonnet on the invariant surface")
    return direct


def cone_angles(surface: TranslationSurface) -> tuple[int, ...]:
    """Cone angles as multiples of 2π, sorted."""
    return tuple(sorted(v.multiple for v in surface.vertices))


def stratum(surface: TranslationSurface) -> tuple[int, ...]:
    return tuple(sorted((m for m in cone_angles(surface) if m > 1), reverse=True))


def stratum_label(surface: TranslationSurface) -> str:
    parts = stratum(surface)
    if not parts:
        return "{}"
    return "{" + ", ".join(f"{2 * m}π" for m in parts) + "}"


@dataclass(frozen=True)
class Fiber:
    point: str
    size: int
    index: int


@dataclass(frozen=True)
class RamificationReport:
    fibers: tuple[Fiber, ...]
    degree: int
    deg_r: int

    @property
    def chi(self) -> int:
        return 2 * self.degree - self.deg_r


def ramification_report(data: RationalityData) -> RamificationReport:
    l = data.l
    fibers = []
    for c in data.interior:
        fibers.append(Fiber(c.name, l // c.den, c.den))
        fibers.append(Fiber(f"{c.name}'", l // c.den, c.den))
    for c in data.boundary:
        fibers.append(Fiber(c.name, l // c.den, c.den))
    deg_r = sum(f.size * (f.index - 1) for f in fibers)
    return RamificationReport(tuple(fibers), l, deg_r)


def fiber_report(surface: TranslationSurface) -> dict[str, tuple[int, ...]]:
    """For each singular point of the doubled disk, the cone multiples of the surface points over it."""
    disk = surface.cut_disk.disk
    over: dict[str, list[int]] = defaultdict(list)
    for vertex in surface.vertices:
        g, t = vertex.tokens[0]
        vc = disk.vertex_classes[surface.cut_disk.corner_classes[t]]
        if not vc.singular:
            continue
        name = vc.name if vc.is_boundary or not g.flip else f"{vc.name}'"
        over[name].append(vertex.multiple)
    return {name: tuple(sorted(values)) for name, values in sorted(over.items())}


def check_fibers(surface: TranslationSurface) -> None:
    data = surface.data
    report = ramification_report(data)
    counted = fiber_report(surface)
    multiples = {c.name: c.num for c in data.interior + data.boundary}
    multiples.update({f"{c.name}'": c.num for c in data.interior})
    for fiber in report.fibers:
        found = counted.get(fiber.point, ())
        if len(found) != fiber.size:
            raise ConsistencyError(
                f"{len(found)} surface points over {fiber.point}, expected {fiber.size}"
            )
        if any(m != multiples[fiber.point] for m in found):
            raise ConsistencyError(
                f"Surface points over {fiber.point} have cone multiples {list(found)}, "
                f"expected {multiples[fiber.point]}"
            )
    if report.chi != euler_char_direct(surface):
        raise EulerCharacteristicMismatch("Riemann-Hurwitz count disagrees with the direct count")


def check_cut_independence(
    disk: FlatDisk, first: CutSystem, second: CutSystem
) -> tuple[TranslationSurface, TranslationSurface]:
    """Build S(D) from two cut systems; χ, stratum and area must not depend on the choice."""
    a = build_invariant_surface(disk, first)
    b = build_invariant_surface(disk, second)
    if euler_char_direct(a) != euler_char_direct(b):
        raise ConsistencyError(
            f"chi {euler_char_direct(a)} and {euler_char_direct(b)} differ between cut systems"
        )
    if stratum(a) != stratum(b):
        raise ConsistencyError(f"Strata {stratum_label(a)} and {stratum_label(b)} differ between cut systems")
    if not math.isclose(a.area, b.area, rel_tol=1e-9):
        raise ConsistencyError(f"Areas {a.area:.12g} and {b.area:.12g} differ between cut systems")
    return a, b


@dataclass(frozen=True)
class ClosedFlatSurface:
    disk_id: str
    polygons: tuple[tuple[str, tuple[tuple[float, float], ...]], ...]
    cone_points: tuple[tuple[str, float, RationalAngle | None], ...]
    euler_characteristic: int
    area: float

    def curvature(self) -> float:
        return sum(TWO_PI - angle for _, angle, _ in self.cone_points)


def double(disk: FlatDisk) -> ClosedFlatSurface:
    """Glue the disk to its mirror image along the boundary."""
    polygons = []
    for face, polygon in sorted(disk.polygons.items()):
        polygons.append((face, polygon.vertices))
        mirrored = tuple((x, -y) for x, y in reversed(polygon.vertices))
        polygons.append((f"{face}'", mirrored))
    cones: list[tuple[str, float, RationalAngle | None]] = []
    for vc in disk.vertex_classes:
        if vc.is_boundary:
            rational = vc.rational * 2 if vc.rational is not None else None
            cones.append((vc.name, 2 * vc.angle, rational))
        else:
            cones.append((vc.name, vc.angle, vc.rational))
            cones.append((f"{vc.name}'", vc.angle, vc.rational))
    interior = sum(1 for vc in disk.vertex_classes if not vc.is_boundary)
    vertices = 2 * interior + (len(disk.vertex_classes) - interior)
    edges = 2 * len(disk.spec.gluings) + len(disk.boundary_cycle)
    faces = 2 * len(disk.polygons)
    return ClosedFlatSurface(
        disk_id=disk.disk_id,
        polygons=tuple(polygons),
        cone_points=tuple(cones),
        euler_characteristic=vertices - edges + faces,
        area=2 * disk.area,
    )


def _round(value: float) -> float:
    return round(float(value), 9) + 0.0


def surface_to_json(surface: TranslationSurface) -> str:
    names = surface.edge_names
    chi = euler_char_direct(surface)
    doc = {
        "l": surface.data.l,
        "group_order": surface.group.order,
        "faces": {
            label: [[_round(x), _round(y)] for x, y in coords]
            for label, coords in surface.face_coordinates()
        },
        "pairings": [
            [[g.label(), names[t]], [h.label(), names[u]]] for (g, t), (h, u) in surface.pairings
        ],
        "cone_angles": list(cone_angles(surface)),
        "euler_characteristic": chi,
        "genus": genus_from_chi(chi),
        "stratum": list(stratum(surface)),
        "area": _round(surface.area),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def angle_label(angle: float, rational: RationalAngle | None) -> str:
    if rational is not None:
        return rational.label()
    return f"{angle:.9f}"
