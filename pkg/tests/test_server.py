import pytest

from flatdisk import server
from flatdisk.config import AppConfig, BkmConfig
from flatdisk.errors import GuardrailError, IrrationalDisk, SpecError
from flatdisk.server import DiskToolService, _request_id, build_app


@pytest.fixture
def service() -> DiskToolService:
    return DiskToolService(AppConfig(bkm=BkmConfig(samples=20)))


def test_request_id() -> None:
    assert _request_id("abc") == "abc"
    assert len(_request_id(None)) == 36


def test_validate_disk(service, disk_json) -> None:
    result = service.validate_disk(disk_json("equilateral_glue"))
    assert result["disk_id"] == "equilateral_glue"
    assert [(c["name"], c["kind"], c["angle"]) for c in result["vertex_classes"]] == [
        ("x1", "interior", "1/3π"),
        ("y1", "boundary", "2/3π"),
    ]


def test_validate_disk_rejects_bad_spec(service, disk_json) -> None:
    with pytest.raises(SpecError):
        service.validate_disk(disk_json("bad_lengths"))


def test_trace_trajectory(service, disk_json) -> None:
    result = service.trace_trajectory(disk_json("square"), "S", 0.5, 0.5, 0.0, max_events=4)
    assert result["word"] == ["e2", "e4", "e2", "e4"]
    assert result["termination"] == "max_events"
    assert result["events"][0]["point"] == pytest.approx([1.0, 0.5])


def test_trace_trajectory_guardrails(service, disk_json) -> None:
    with pytest.raises(GuardrailError):
        service.trace_trajectory(disk_json("square"), "Q", 0.5, 0.5, 0.0)
    with pytest.raises(GuardrailError):
        service.trace_trajectory(disk_json("square"), "S", 0.5, 0.5, 0.0, max_length=-1.0)


def test_unfold_trajectory(service, disk_json) -> None:
    result = service.unfold_trajectory(disk_json("two_squares"), "A", 0.5, 0.5, 1.5707963267948966, max_events=4)
    assert result["word"] == ["a2^l", "a1^l", "a2^l", "a1^l"]
    assert result["copies"] == 5
    assert result["max_deviation"] < 1e-9
    assert result["svg"].startswith("<?xml")


def test_invariant_surface(service, disk_json) -> None:
    result = service.invariant_surface(disk_json("equilateral_glue"))
    assert result["l"] == 6
    assert result["group_order"] == 12
    assert result["chi_formula"] == result["chi_direct"] == -2
    assert result["genus"] == 2
    assert result["stratum"] == [2, 2]
    assert result["deg_r"] == 14


def test_invariant_surface_irrational(service, disk_json) -> None:
    with pytest.raises(IrrationalDisk):
        service.invariant_surface(disk_json("triangle"))


def test_bkm_experiment(service, disk_json) -> None:
    result = service.bkm_experiment(disk_json("square"), "S", 0.5, 0.5, 0.1, [2.0, 1.0], seed=5)
    assert [row["T"] for row in result["rows"]] == ["1", "2"]
    assert all(row["samples"] == "20" for row in result["rows"])
    assert result["fractions"][0] >= result["fractions"][1]


def test_build_app(service) -> None:
    app = build_app(AppConfig(), service)
    assert app.name == "flatdisk-mcp"


def test_main_wires_config_and_app(mocker) -> None:
    config = AppConfig()
    mocker.patch.object(server, "load_config", return_value=config)
    configure = mocker.patch.object(server, "configure_logging")
    app = mocker.Mock()
    build = mocker.patch.object(server, "build_app", return_value=app)
    server.main()
    configure.assert_called_once_with("info")
    assert build.call_args.args[0] is config
    app.run.assert_called_once_with()
