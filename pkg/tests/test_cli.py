import json

import pytest

from flatdisk.cli import EXIT_CONSISTENCY, EXIT_IRRATIONAL, EXIT_OK, EXIT_SPEC, EXIT_USAGE, run_cli
from flatdisk.errors import EulerCharacteristicMismatch


def _disk(disks_dir, name: str) -> str:
    return str(disks_dir / f"{name}.json")


def test_surface_equilateral(disks_dir, capsys) -> None:
    assert run_cli(["surface", _disk(disks_dir, "equilateral_glue")]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "l=6, |G|=12, chi=-2 (formula) = -2 (direct), genus=2"
    assert out[1] == "stratum: {4π, 4π}"
    assert "deg R=14, 2l - deg R=-2" in out
    assert any(line.startswith("doubling: chi=2") for line in out)


def test_surface_square(disks_dir, capsys) -> None:
    assert run_cli(["surface", _disk(disks_dir, "square")]) == EXIT_OK
    assert capsys.readouterr().out.startswith("l=2, |G|=4, chi=0 (formula) = 0 (direct), genus=1\n")


def test_surface_writes_json_and_svg(disks_dir, tmp_path, capsys) -> None:
    json_path, svg_path = tmp_path / "s.json", tmp_path / "s.svg"
    argv = ["surface", _disk(disks_dir, "right_isosceles_glue"), "--json", str(json_path), "--svg", str(svg_path)]
    assert run_cli(argv) == EXIT_OK
    doc = json.loads(json_path.read_text())
    assert doc["l"] == 4
    assert doc["genus"] == 1
    assert svg_path.read_text().count("<path") == 8
    first = (json_path.read_bytes(), svg_path.read_bytes())
    assert run_cli(argv) == EXIT_OK
    assert (json_path.read_bytes(), svg_path.read_bytes()) == first


def test_validate(disks_dir, capsys) -> None:
    assert run_cli(["validate", _disk(disks_dir, "equilateral_glue")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "disk: equilateral_glue" in out
    assert "1/3π" in out
    assert "2/3π" in out


@pytest.mark.parametrize(
    ("name", "error"),
    [("bad_lengths", "EdgeLengthMismatch"), ("inconsistent_angles", "GaussBonnetViolation")],
)
def test_validate_rejects(disks_dir, capsys, name: str, error: str) -> None:
    assert run_cli(["validate", _disk(disks_dir, name)]) == EXIT_SPEC
    assert error in capsys.readouterr().err


def test_validate_rejects_interior_marked_point(disks_dir, tmp_path, capsys) -> None:
    raw = json.loads((disks_dir / "equilateral_glue.json").read_text())
    raw["marked_boundary"] = ["T", 0]
    spec = tmp_path / "marked.json"
    spec.write_text(json.dumps(raw))
    assert run_cli(["validate", str(spec)]) == EXIT_SPEC
    assert "not a boundary vertex" in capsys.readouterr().err


def test_irrational_surface(disks_dir, capsys) -> None:
    assert run_cli(["surface", _disk(disks_dir, "triangle")]) == EXIT_IRRATIONAL
    assert "IrrationalDisk" in capsys.readouterr().err


def test_consistency_failure(disks_dir, mocker, capsys) -> None:
    mocker.patch("flatdisk.cli.check_euler", side_effect=EulerCharacteristicMismatch("chi disagrees"))
    assert run_cli(["surface", _disk(disks_dir, "square")]) == EXIT_CONSISTENCY
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "EulerCharacteristicMismatch" in captured.err


def test_trace(disks_dir, capsys) -> None:
    argv = ["trace", _disk(disks_dir, "square"), "--start", "S,0.5,0.5", "--dir", "0", "--max-events", "4"]
    assert run_cli(argv) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "word: e2 e4 e2 e4"
    assert out[-2] == "termination: max_events"


def test_trace_singular_hit(disks_dir, capsys) -> None:
    argv = ["trace", _disk(disks_dir, "two_squares"), "--start", "A,0.5,0.5", "--dir", "1/4"]
    assert run_cli(argv) == EXIT_OK
    assert "termination: singular_hit at x2" in capsys.readouterr().out


def test_unfold(disks_dir, tmp_path, capsys) -> None:
    svg = tmp_path / "u.svg"
    argv = [
        "unfold",
        _disk(disks_dir, "two_squares"),
        "--start",
        "A,0.37,0.61",
        "--dir",
        "0.9",
        "--max-events",
        "12",
        "--svg",
        str(svg),
    ]
    assert run_cli(argv) == EXIT_OK
    assert svg.read_text().startswith("<?xml")
    assert "copies:" in capsys.readouterr().out


def test_bkm_csv_is_deterministic(disks_dir, tmp_path) -> None:
    out = tmp_path / "bkm.csv"
    argv = [
        "bkm",
        _disk(disks_dir, "equilateral_glue"),
        "--point",
        "T,0.5,0.2886751345948129",
        "--delta",
        "0.05",
        "--lengths",
        "1,5",
        "--samples",
        "50",
        "--seed",
        "42",
        "--csv",
        str(out),
    ]
    assert run_cli(argv) == EXIT_OK
    first = out.read_bytes()
    assert first.decode().splitlines()[0] == "T,fraction,samples,delta,seed"
    assert run_cli(argv) == EXIT_OK
    assert out.read_bytes() == first


@pytest.mark.parametrize(
    "argv",
    [
        ["validate"],
        ["validate", "x.json", "--bogus"],
        ["trace", "x.json", "--start", "S,0.5,0.5"],
    ],
)
def test_usage_errors(argv) -> None:
    assert run_cli(argv) == EXIT_USAGE


def test_guardrail_errors(disks_dir) -> None:
    square = _disk(disks_dir, "square")
    assert run_cli(["trace", square, "--start", "S,abc", "--dir", "0"]) == EXIT_USAGE
    assert run_cli(["trace", square, "--start", "Z,0.5,0.5", "--dir", "0"]) == EXIT_USAGE
    assert run_cli(["trace", square, "--start", "S,0.5,0.5", "--dir", "0", "--max-events", "0"]) == EXIT_USAGE


def test_missing_config_file(disks_dir, tmp_path) -> None:
    argv = ["--config", str(tmp_path / "missing.yml"), "validate", _disk(disks_dir, "square")]
    assert run_cli(argv) == EXIT_USAGE


def test_version(capsys) -> None:
    assert run_cli(["--version"]) == EXIT_OK
    assert "0.1.0" in capsys.readouterr().out
