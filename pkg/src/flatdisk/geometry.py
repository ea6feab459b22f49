"""Exact angle arithmetic, planar isometries and the finite dihedral groups.

Angles that matter to the group structure are kept as exact fractions of pi
(``RationalAngle``); floating point radians only appear in chart coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import NonRepresentableAngle, NotRational

TWO_PI = 2.0 * math.pi

Point = tuple[float, float]


@dataclass(frozen=True, order=True)
class RationalAngle:
    """The angle ``(num / den) * pi`` radians, always in lowest terms."""

    num: int
    den: int = 1

    def __post_init__(self) -> None:
        if self.den == 0:
            raise ValueError("denominator must be non-zero")
        num, den = int(self.num), int(self.den)
        if den < 0:
            num, den = -num, -den
        g = math.gcd(abs(num), den) or 1
        object.__setattr__(self, "num", num // g)
        object.__setattr__(self, "den", den // g)

    @classmethod
    def from_fraction(cls, value: Fraction | int) -> RationalAngle:
        value = Fraction(value)
        return cls(value.numerator, value.denominator)

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, self.den)

    def to_radians(self) -> float:
        return self.num * math.pi / self.den

    def __add__(self, other: RationalAngle) -> RationalAngle:
        return RationalAngle.from_fraction(self.as_fraction() + other.as_fraction())

    def __sub__(self, other: RationalAngle) -> RationalAngle:
        return RationalAngle.from_fraction(self.as_fraction() - other.as_fraction())

    def __mul__(self, factor: int | Fraction) -> RationalAngle:
        return RationalAngle.from_fraction(self.as_fraction() * factor)

    __rmul__ = __mul__

    def __neg__(self) -> RationalAngle:
        return RationalAngle(-self.num, self.den)

    def label(self) -> str:
        if self.num == 0:
            return "0"
        if self.den == 1:
            return "π" if self.num == 1 else f"{self.num}π"
        return f"{self.num}/{self.den}π"

    def __str__(self) -> str:
        return self.label()


def rationalize(x: float, max_den: int = 1000, tol: float = 1e-9) -> RationalAngle:
    """Best fraction p/q (q <= max_den) with (p/q)*pi within ``tol`` of ``x``.

    ``Fraction.limit_denominator`` walks the continued fraction expansion, so the
    candidate is the best approximation with a bounded denominator.
    """
    if max_den < 1:
        raise ValueError("max_den must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    candidate = Fraction(x / math.pi).limit_denominator(max_den)
    error = abs(x - float(candidate) * math.pi)
    if error >= tol:
        raise NotRational(
            f"{x!r} is not within {tol:g} of a multiple p/q·π with q <= {max_den}"
        )
    return RationalAngle.from_fraction(candidate)


def normalize_angle(angle: float) -> float:
    """Reduce an angle to [0, 2π)."""
    reduced = math.fmod(angle, TWO_PI)
    if reduced < 0:
        reduced += TWO_PI
    if reduced >= TWO_PI:
        reduced -= TWO_PI
    return reduced


@dataclass(frozen=True)
class PlanarIsometry:
    """``p -> R(angle) F^flip p + translation`` with F the reflection (x, y) -> (x, -y)."""

    flip: bool = False
    angle: float = 0.0
    translation: Point = (0.0, 0.0)

    @classmethod
    def identity(cls) -> PlanarIsometry:
        return cls()

    @classmethod
    def rotation(cls, angle: float, center: Point = (0.0, 0.0)) -> PlanarIsometry:
        c, s = math.cos(angle), math.sin(angle)
        cx, cy = center
        return cls(False, angle, (cx - (c * cx - s * cy), cy - (s * cx + c * cy)))

    @classmethod
    def reflection(cls, direction: float, through: Point = (0.0, 0.0)) -> PlanarIsometry:
        """Reflection across the line through ``through`` with direction angle ``direction``."""
        linear = cls(True, 2.0 * direction, (0.0, 0.0))
        moved = linear.apply_vector(through)
        return cls(True, 2.0 * direction, (through[0] - moved[0], through[1] - moved[1]))

    @classmethod
    def from_segments(cls, src: tuple[Point, Point], dst: tuple[Point, Point]) -> PlanarIsometry:
        """Orientation-preserving isometry taking segment ``src`` onto segment ``dst``."""
        (a0, a1), (b0, b1) = src, dst
        angle = math.atan2(b1[1] - b0[1], b1[0] - b0[0]) - math.atan2(
            a1[1] - a0[1], a1[0] - a0[0]
        )
        rotated = cls(False, angle).apply_vector(a0)
        return cls(False, angle, (b0[0] - rotated[0], b0[1] - rotated[1]))

    def linear(self) -> PlanarIsometry:
        return PlanarIsometry(self.flip, self.angle, (0.0, 0.0))

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        if self.flip:
            return rot @ np.array([[1.0, 0.0], [0.0, -1.0]])
        return rot

    def apply_vector(self, vector: Sequence[float]) -> Point:
        x, y = float(vector[0]), float(vector[1])
        if self.flip:
            y = -y
        c, s = math.cos(self.angle), math.sin(self.angle)
        return (c * x - s * y, s * x + c * y)

    def apply(self, point: Sequence[float]) -> Point:
        x, y = self.apply_vector(point)
        return (x + self.translation[0], y + self.translation[1])

    def apply_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return pts @ self.matrix().T + np.asarray(self.translation)

    def inverse(self) -> PlanarIsometry:
        angle = self.angle if self.flip else -self.angle
        linear = PlanarIsometry(self.flip, angle)
        tx, ty = linear.apply_vector(self.translation)
        return PlanarIsometry(self.flip, angle, (-tx, -ty))

    def __matmul__(self, other: PlanarIsometry) -> PlanarIsometry:
        return compose(self, other)

    def is_close(self, other: PlanarIsometry, tol: float = 1e-9) -> bool:
        return (
            self.flip == other.flip
            and bool(np.allclose(self.matrix(), other.matrix(), atol=tol, rtol=0.0))
            and math.dist(self.translation, other.translation) <= tol
        )


def compose(a: PlanarIsometry, b: PlanarIsometry) -> PlanarIsometry:
    """The isometry ``p -> a(b(p))``."""
    angle = a.angle - b.angle if a.flip else a.angle + b.angle
    tx, ty = a.apply(b.translation)
    return PlanarIsometry(a.flip != b.flip, angle, (tx, ty))


@dataclass(frozen=True, order=True)
class DihedralElement:
    """``R(2πk/l) F^flip``: an element of the dihedral group of order 2l.

    F is the reflection across the base axis. Canonical form ``(flip, k mod l)``.
    """

    flip: bool
    k: int
    l: int

    def __post_init__(self) -> None:
        if self.l < 1:
            raise ValueError("group half-order must be positive")
        object.__setattr__(self, "k", self.k % self.l)

    @classmethod
    def identity(cls, l: int) -> DihedralElement:
        return cls(False, 0, l)

    @classmethod
    def rotation(cls, angle: RationalAngle, l: int) -> DihedralElement:
        """Rotation by ``angle``; it must be a multiple of 2π/l."""
        k = angle.as_fraction() * l / 2
        if k.denominator != 1:
            raise NonRepresentableAngle(f"rotation by {angle} is not a multiple of 2π/{l}")
        return cls(False, int(k), l)

    @classmethod
    def from_isometry(cls, iso: PlanarIsometry, l: int, tol: float = 1e-9) -> DihedralElement:
        """Snap the linear part of ``iso`` onto the group."""
        step = TWO_PI / l
        k = round(iso.angle / step)
        if abs(iso.angle - k * step) > tol:
            raise NonRepresentableAngle(
                f"linear part with angle {iso.angle!r} is not a multiple of 2π/{l}"
            )
        return cls(iso.flip, k, l)

    def __mul__(self, other: DihedralElement) -> DihedralElement:
        if self.l != other.l:
            raise ValueError("elements belong to different groups")
        k = self.k - other.k if self.flip else self.k + other.k
        return DihedralElement(self.flip != other.flip, k, self.l)

    def inverse(self) -> DihedralElement:
        if self.flip:
            return self
        return DihedralElement(False, -self.k, self.l)

    def to_isometry(self) -> PlanarIsometry:
        return PlanarIsometry(self.flip, TWO_PI * self.k / self.l)

    def order(self) -> int:
        if self.flip:
            return 2
        return self.l // math.gcd(self.k, self.l)

    def label(self) -> str:
        return f"{'f' if self.flip else 'r'}{self.k}"

    def __str__(self) -> str:
        return self.label()


def reflect_across_direction(phi: RationalAngle, l: int) -> DihedralElement:
    """Linear part of the reflection across a line of direction ``phi`` (a multiple of π)."""
    k = phi.as_fraction() * l
    if k.denominator != 1:
        raise NonRepresentableAngle(f"direction {phi} is not a multiple of π/{l}")
    return DihedralElement(True, int(k), l)


def group_closure(generators: Iterable[DihedralElement], l: int) -> list[DihedralElement]:
    """All products of ``generators``, sorted by canonical form."""
    identity = DihedralElement.identity(l)
    gens = list(dict.fromkeys(generators))
    seen = {identity}
    frontier = [identity]
    while frontier:
        nxt: list[DihedralElement] = []
        for element in frontier:
            for gen in gens:
                product = element * gen
                if product not in seen:
                    seen.add(product)
                    nxt.append(product)
        frontier = nxt
    return sorted(seen)


def cross(u: Sequence[float], v: Sequence[float]) -> float:
    return u[0] * v[1] - u[1] * v[0]


def polygon_area(vertices: Sequence[Point]) -> float:
    """Signed shoelace area; positive for counterclockwise vertex lists."""
    pts = np.asarray(vertices, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def corner_angle(prev: Point, at: Point, nxt: Point) -> float:
    """Interior angle at ``at`` of a counterclockwise polygon, in (0, 2π)."""
    out = (nxt[0] - at[0], nxt[1] - at[1])
    back = (prev[0] - at[0], prev[1] - at[1])
    return normalize_angle(math.atan2(back[1], back[0]) - math.atan2(out[1], out[0]))


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = b[0] - a[0], b[1] - a[1]
    length_sq = ax * ax + ay * ay
    if length_sq == 0.0:
        return math.dist(p, a)
    t = ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / length_sq
    t = min(1.0, max(0.0, t))
    return math.hypot(a[0] + t * ax - p[0], a[1] + t * ay - p[1])


def segments_intersect(a0: Point, a1: Point, b0: Point, b1: Point, tol: float = 1e-12) -> bool:
    """Proper or touching intersection of two closed segments."""
    d1 = cross((b1[0] - b0[0], b1[1] - b0[1]), (a0[0] - b0[0], a0[1] - b0[1]))
    d2 = cross((b1[0] - b0[0], b1[1] - b0[1]), (a1[0] - b0[0], a1[1] - b0[1]))
    d3 = cross((a1[0] - a0[0], a1[1] - a0[1]), (b0[0] - a0[0], b0[1] - a0[1]))
    d4 = cross((a1[0] - a0[0], a1[1] - a0[1]), (b1[0] - a0[0], b1[1] - a0[1]))
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    return (
        point_segment_distance(a0, b0, b1) <= tol
        or point_segment_distance(a1, b0, b1) <= tol
        or point_segment_distance(b0, a0, a1) <= tol
        or point_segment_distance(b1, a0, a1) <= tol
    )
