import math

import pytest

from flatdisk.errors import GuardrailError
from flatdisk.guardrails import (
    clamp_limit,
    ensure_non_negative,
    ensure_positive,
    parse_direction,
    parse_lengths,
    parse_point,
    sanitize_face_id,
)


def test_sanitize_face_id() -> None:
    assert sanitize_face_id(" A ", {"A", "B"}) == "A"
    with pytest.raises(GuardrailError):
        sanitize_face_id("not valid*")
    with pytest.raises(GuardrailError):
        sanitize_face_id("C", {"A", "B"})


def test_parse_point() -> None:
    assert parse_point("T, 0.5, 0.25") == ("T", 0.5, 0.25)
    for raw in ("T,1", "T,x,1", "T,nan,0"):
        with pytest.raises(GuardrailError):
            parse_point(raw)


def test_parse_direction() -> None:
    assert parse_direction("1/2") == pytest.approx(math.pi / 2)
    assert parse_direction("-0.25") == pytest.approx(-0.25)
    with pytest.raises(GuardrailError):
        parse_direction("1/0")
    with pytest.raises(GuardrailError):
        parse_direction("east")


def test_parse_lengths() -> None:
    assert parse_lengths("100,10,100,1000") == [10.0, 100.0, 1000.0]
    with pytest.raises(GuardrailError):
        parse_lengths("10,-1")
    with pytest.raises(GuardrailError):
        parse_lengths(",")


def test_ensure_bounds() -> None:
    assert ensure_positive(2.0, "x") == 2.0
    assert ensure_non_negative(0.0, "delta") == 0.0
    with pytest.raises(GuardrailError):
        ensure_positive(0.0, "x")
    with pytest.raises(GuardrailError):
        ensure_non_negative(-0.1, "delta")


def test_clamp_limit() -> None:
    assert clamp_limit(5, 10) == 5
    assert clamp_limit(15, 10) == 10
    assert clamp_limit(None, 10) == 10
    with pytest.raises(GuardrailError):
        clamp_limit(0, 10)
