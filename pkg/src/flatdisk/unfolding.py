"""Straighten traced trajectories by laying out copies of the cut disk, and render SVG."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .billiard import Trajectory
from .disk import CutDisk
from .errors import WordMismatch
from .geometry import PlanarIsometry
from .logging_utils import log_extra

if TYPE_CHECKING:
    from .surface import TranslationSurface

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Placement:
    index: int
    isometry: PlanarIsometry
    letter: str | None


@dataclass(frozen=True, eq=False)
class Unfolding:
    placements: tuple[Placement, ...]
    polyline: np.ndarray
    cut_disk: CutDisk
    trajectory: Trajectory | None
    max_deviation: float
    projection_error: float

    @classmethod
    def empty(cls, cut_disk: CutDisk) -> Unfolding:
        return cls(
            placements=(Placement(0, PlanarIsometry.identity(), None),),
            polyline=np.zeros((0, 2)),
            cut_disk=cut_disk,
            trajectory=None,
            max_deviation=0.0,
            projection_error=0.0,
        )

    @property
    def word(self) -> tuple[str, ...]:
        return tuple(p.letter for p in self.placements[1:] if p.letter is not None)

    def copies(self) -> list[np.ndarray]:
        base = self.cut_disk.vertices()
        return [p.isometry.apply_many(base) for p in self.placements]


@dataclass(frozen=True, eq=False)
class SurfaceNet:
    """Faces of a translation surface laid out side by side."""

    faces: tuple[tuple[str, np.ndarray], ...]


def collinearity_deviation(points: np.ndarray) -> float:
    """Largest distance to the best-fit line, relative to the extent of ``points``."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 3:
        return 0.0
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    extent = float(np.ptp(centered @ vt[0]))
    if extent == 0.0:
        return 0.0
    return float(np.max(np.abs(centered @ normal))) / extent


def unfold(cut_disk: CutDisk, traj: Trajectory) -> Unfolding:
    labels = set(cut_disk.labels)
    phi = PlanarIsometry.identity()
    placements = [Placement(0, phi, None)]
    developed: list[tuple[float, float]] = []
    worst = 0.0

    def develop(face: str, point: Sequence[float]) -> tuple[float, float]:
        nonlocal worst
        chart = cut_disk.chart(face)
        out = phi.apply(chart.apply(point))
        back = chart.inverse().apply(phi.inverse().apply(out))
        worst = max(worst, math.dist(back, point))
        return out

    developed.append(develop(traj.start.face, traj.start.position))
    for event in traj.events:
        developed.append(develop(event.face, event.point))
        if event.kind == "seam":
            continue
        letter = event.label
        if letter not in labels or cut_disk.label_of(event.face, event.edge) != letter:
            raise WordMismatch(
                f"Letter {letter} at polygon {event.face} edge {event.edge} does not label the cut disk"
            )
        phi = phi @ cut_disk.regluing(letter)
        placements.append(Placement(len(placements), phi, letter))
    developed.append(develop(traj.end.face, traj.end.position))

    polyline = np.array(developed, dtype=float)
    deviation = collinearity_deviation(polyline)
    log.debug(
        "Trajectory unfolded",
        extra=log_extra(copies=len(placements), deviation=deviation, projection_error=worst),
    )
    return Unfolding(
        placements=tuple(placements),
        polyline=polyline,
        cut_disk=cut_disk,
        trajectory=traj,
        max_deviation=deviation,
        projection_error=worst,
    )


def surface_net(surface: TranslationSurface, gap: float = 0.25) -> SurfaceNet:
    """Place the faces of ``surface`` on a grid, in face order."""
    faces = [(label, np.asarray(coords, dtype=float)) for label, coords in surface.face_coordinates()]
    if not faces:
        return SurfaceNet(())
    width = max(float(np.ptp(c[:, 0])) for _, c in faces) + gap
    height = max(float(np.ptp(c[:, 1])) for _, c in faces) + gap
    columns = math.ceil(math.sqrt(len(faces)))
    laid = []
    for i, (label, coords) in enumerate(faces):
        row, col = divmod(i, columns)
        shift = np.array([col * width, -row * height]) - coords.min(axis=0)
        laid.append((label, coords + shift))
    return SurfaceNet(tuple(laid))


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _path(points: np.ndarray) -> str:
    head, *rest = points
    parts = [f"M {_fmt(head[0])} {_fmt(-head[1])}"]
    parts.extend(f"L {_fmt(x)} {_fmt(-y)}" for x, y in rest)
    return " ".join(parts) + " Z"


def render_svg(item: Unfolding | SurfaceNet) -> str:
    """SVG 1.1 document: one closed path per copy or face, one polyline for the trajectory."""
    if isinstance(item, Unfolding):
        shapes = [(str(p.index), c) for p, c in zip(item.placements, item.copies())]
        polyline = item.polyline if len(item.polyline) >= 2 else None
        caption = f"{len(shapes)} copies"
    else:
        shapes = list(item.faces)
        polyline = None
        caption = f"{len(shapes)} faces"

    stacks = [c for _, c in shapes]
    if polyline is not None:
        stacks.append(polyline)
    everything = np.vstack(stacks) if stacks else np.zeros((1, 2))
    lo, hi = everything.min(axis=0), everything.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * span
    x0, x1 = lo[0] - pad[0], hi[0] + pad[0]
    y0, y1 = -(hi[1] + pad[1]), -(lo[1] - pad[1])
    stroke = _fmt(0.004 * float(max(span)))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        (
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'viewBox="{_fmt(x0)} {_fmt(y0)} {_fmt(x1 - x0)} {_fmt(y1 - y0)}" '
            f'fill="none" stroke="#000" stroke-width="{stroke}" stroke-linejoin="round">'
        ),
        f"  <!-- {caption} -->",
    ]
    for label, coords in shapes:
        lines.append(f'  <path d="{_path(coords)}" fill="#dde6f0" fill-opacity="0.5" data-copy="{label}" />')
    if polyline is not None:
        points = " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in polyline)
        lines.append(f'  <polyline points="{points}" stroke="#c0392b" />')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
