from pathlib import Path

import pytest

from flatdisk.config import AppConfig, Tolerances, load_config, with_disk_overrides
from flatdisk.errors import ConfigError


def write_config(tmp_path: Path, content: str) -> Path:
    path = tmp_path / "config.yml"
    path.write_text(content)
    return path


def test_defaults_without_file() -> None:
    config = load_config(None, env={})
    assert config == AppConfig()
    assert config.tolerances.max_den == 1000
    assert config.bkm.seed == 42


def test_env_substitution(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("FLATDISK_SAMPLES", "250")
    cfg_path = write_config(
        tmp_path,
        """
tolerances:
  geom: 1.0e-8
bkm:
  samples: ${FLATDISK_SAMPLES}
  seed: 7
observability:
  log_level: DEBUG
""",
    )

    config = load_config(cfg_path)
    assert config.bkm.samples == 250
    assert config.bkm.seed == 7
    assert config.tolerances.geom == pytest.approx(1e-8)
    assert config.tolerances.hit == pytest.approx(1e-9)
    assert config.observability.log_level == "debug"


def test_config_path_from_env(tmp_path: Path) -> None:
    cfg_path = write_config(tmp_path, "limits:\n  max_events: 500\n")
    config = load_config(env={"FLATDISK_CONFIG": str(cfg_path)})
    assert config.limits.max_events == 500


def test_unset_variable_is_an_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("FLATDISK_MISSING_SEED", raising=False)
    cfg_path = write_config(tmp_path, "bkm:\n  seed: ${FLATDISK_MISSING_SEED}\n")
    with pytest.raises(ConfigError):
        load_config(cfg_path)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yml")


@pytest.mark.parametrize(
    "content",
    [
        "tolerances:\n  geom: 0\n",
        "limits:\n  max_events: -1\n",
        "bkm:\n  samples: 20\nlimits:\n  max_samples: 10\n",
        "bkm:\n  workers: 8\n",
        "observability:\n  log_level: loud\n",
        "tolerances: [1, 2]\n",
    ],
)
def test_invalid_values(tmp_path: Path, content: str) -> None:
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, content))


def test_disk_overrides() -> None:
    base = Tolerances()
    tuned = with_disk_overrides(base, {"geom": 1e-6, "max_den": 50})
    assert tuned.geom == pytest.approx(1e-6)
    assert tuned.max_den == 50
    assert tuned.hit == base.hit
    assert with_disk_overrides(base, None) is base
