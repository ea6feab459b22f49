from __future__ import annotations

import math
import re
from fractions import Fraction

from .errors import GuardrailError

_FACE_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def sanitize_face_id(face: str, known: set[str] | None = None) -> str:
    face = face.strip()
    if not _FACE_ID_RE.match(face):
        raise GuardrailError(f"Invalid polygon id {face!r}")
    if known is not None and face not in known:
        raise GuardrailError(f"Unknown polygon id {face!r}")
    return face


def parse_point(raw: str) -> tuple[str, float, float]:
    """Parse ``FACE,X,Y``."""
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise GuardrailError(f"Point must look like FACE,X,Y; got {raw!r}")
    try:
        x, y = float(parts[1]), float(parts[2])
    except ValueError as exc:
        raise GuardrailError(f"Point coordinates must be numbers; got {raw!r}") from exc
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GuardrailError("Point coordinates must be finite")
    return sanitize_face_id(parts[0]), x, y


def parse_direction(raw: str) -> float:
    """Radians, or ``p/q`` meaning (p/q)·π."""
    text = raw.strip()
    try:
        if "/" in text:
            return float(Fraction(text)) * math.pi
        value = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise GuardrailError(f"Direction must be radians or p/q; got {raw!r}") from exc
    if not math.isfinite(value):
        raise GuardrailError("Direction must be finite")
    return value


def parse_lengths(raw: str) -> list[float]:
    """Parse ``T1,T2,...`` into sorted unique positive lengths."""
    try:
        values = [float(p) for p in raw.split(",") if p.strip()]
    except ValueError as exc:
        raise GuardrailError(f"Lengths must be numbers; got {raw!r}") from exc
    if not values:
        raise GuardrailError("At least one length is required")
    for value in values:
        ensure_positive(value, "length")
    return sorted(set(values))


def ensure_positive(value: float, field_name: str) -> float:
    if not math.isfinite(value) or value <= 0:
        raise GuardrailError(f"{field_name} must be a positive number")
    return value


def ensure_non_negative(value: float, field_name: str) -> float:
    if not math.isfinite(value) or value < 0:
        raise GuardrailError(f"{field_name} must be a non-negative number")
    return value


def clamp_limit(requested: int | None, cap: int) -> int:
    if requested is None:
        return cap
    if requested <= 0:
        raise GuardrailError("Limits must be positive")
    return min(requested, cap)
