from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

CONFIG_ENV = "FLATDISK_CONFIG"


@dataclass(frozen=True)
class Tolerances:
    geom: float = 1e-9
    hit: float = 1e-9
    max_den: int = 1000
    rational_tol: float = 1e-9


@dataclass(frozen=True)
class LimitsConfig:
    max_events: int = 1_000_000
    max_samples: int = 1_000_000
    max_workers: int = 4


@dataclass(frozen=True)
class BkmConfig:
    samples: int = 10000
    seed: int = 42
    workers: int = 1


@dataclass(frozen=True)
class ObservabilityConfig:
    log_level: str = "info"


@dataclass(frozen=True)
class AppConfig:
    tolerances: Tolerances = field(default_factory=Tolerances)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    bkm: BkmConfig = field(default_factory=BkmConfig)
    observability: ObservabilityConfig = field(default_factory=ObservabilityConfig)


_LOG_LEVELS = {"debug", "info", "warning", "error", "critical"}


def _resolve_env(value: Any, env: Mapping[str, str]) -> Any:
    if isinstance(value, str):
        expanded = os.path.expandvars(value)
        if expanded.startswith("${") and expanded.endswith("}"):
            key = expanded[2:-1]
            if key not in env:
                raise ConfigError(f"Environment variable {key} is required but not set")
            return env[key]
        return expanded
    if isinstance(value, list):
        return [_resolve_env(v, env) for v in value]
    if isinstance(value, dict):
        return {k: _resolve_env(v, env) for k, v in value.items()}
    return value


def _positive_float(raw: Mapping[str, Any], key: str, default: float) -> float:
    try:
        value = float(raw.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number") from exc
    if value <= 0:
        raise ConfigError(f"{key} must be greater than 0")
    return value


def _positive_int(raw: Mapping[str, Any], key: str, default: int) -> int:
    try:
        value = int(raw.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer") from exc
    if value <= 0:
        raise ConfigError(f"{key} must be greater than 0")
    return value


def _section(resolved: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = resolved.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Config section {name} must be a mapping")
    return section


def parse_config(raw: Mapping[str, Any] | None, env: Mapping[str, str] | None = None) -> AppConfig:
    env = env if env is not None else os.environ
    resolved = _resolve_env(dict(raw or {}), env)

    tol_raw = _section(resolved, "tolerances")
    defaults = Tolerances()
    tolerances = Tolerances(
        geom=_positive_float(tol_raw, "geom", defaults.geom),
        hit=_positive_float(tol_raw, "hit", defaults.hit),
        max_den=_positive_int(tol_raw, "max_den", defaults.max_den),
        rational_tol=_positive_float(tol_raw, "rational_tol", defaults.rational_tol),
    )

    limits_raw = _section(resolved, "limits")
    limit_defaults = LimitsConfig()
    limits = LimitsConfig(
        max_events=_positive_int(limits_raw, "max_events", limit_defaults.max_events),
        max_samples=_positive_int(limits_raw, "max_samples", limit_defaults.max_samples),
        max_workers=_positive_int(limits_raw, "max_workers", limit_defaults.max_workers),
    )

    bkm_raw = _section(resolved, "bkm")
    bkm_defaults = BkmConfig()
    try:
        seed = int(bkm_raw.get("seed", bkm_defaults.seed))
    except (TypeError, ValueError) as exc:
        raise ConfigError("seed must be an integer") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    bkm = BkmConfig(
        samples=_positive_int(bkm_raw, "samples", bkm_defaults.samples),
        seed=seed,
        workers=_positive_int(bkm_raw, "workers", bkm_defaults.workers),
    )
    if bkm.samples > limits.max_samples:
        raise ConfigError("bkm.samples exceeds limits.max_samples")
    if bkm.workers > limits.max_workers:
        raise ConfigError("bkm.workers exceeds limits.max_workers")

    observability_raw = _section(resolved, "observability")
    log_level = str(observability_raw.get("log_level", "info")).lower()
    if log_level not in _LOG_LEVELS:
        raise ConfigError(f"Unsupported log level: {log_level}")

    return AppConfig(
        tolerances=tolerances,
        limits=limits,
        bkm=bkm,
        observability=ObservabilityConfig(log_level=log_level),
    )


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> AppConfig:
    env = env if env is not None else os.environ
    if path is None:
        path = env.get(CONFIG_ENV)
    if not path:
        return AppConfig()
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Config file {config_path} does not exist")
    try:
        raw = yaml.safe_load(config_path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file {config_path} is not valid YAML") from exc
    if not isinstance(raw, dict):
        raise ConfigError("Config file must contain a mapping")
    return parse_config(raw, env)


def with_disk_overrides(tolerances: Tolerances, overrides: Mapping[str, Any] | None) -> Tolerances:
    """Apply the per-disk ``tolerances`` object of a spec file."""
    if not overrides:
        return tolerances
    return replace(
        tolerances,
        geom=_positive_float(overrides, "geom", tolerances.geom),
        max_den=_positive_int(overrides, "max_den", tolerances.max_den),
    )
