"""Engine configuration: one dataclass per module, overridable from JSON or TOML."""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .credibility import CredibilityParams
from .graph import GraphParams
from .kernel import DecayParams, KernelParams, ProbationParams, ResetParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

CONFIG_VERSION = 1

METHOD_RIGOUR = {
    "RCT": 0.9,
    "meta-analysis": 0.85,
    "observational": 0.6,
    "simulation": 0.5,
    "theoretical": 0.5,
    "other": 0.4,
}


@dataclass(frozen=True)
class ProbationConfig:
    enabled: bool = True
    params: ProbationParams = ProbationParams()


@dataclass(frozen=True)
class AppConfig:
    id: str
    domains: tuple[str, ...] | None = None
    concepts: tuple[str, ...] | None = None
    methods: tuple[str, ...] | None = None
    risk_threshold: float = 1.0
    output: str = "top_k"
    u_tp: float = 1.0
    lambda_fp: float = 1.0


@dataclass(frozen=True)
class UtilityConfig:
    lambdas: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    propagation_floor: float | None = None
    loss_theta: float = 0.5
    default_fp: float = 0.5
    default_fn: float = 0.5
    max_fp: float = 1.0
    max_fn: float = 1.0
    risk_gamma: float = 0.7
    freshness_days: float = 30.0
    freshness_boost: float = 0.25
    apps: tuple[AppConfig, ...] = (AppConfig("default"),)


@dataclass(frozen=True)
class ServiceConfig:
    bind: str = "127.0.0.1:8000"
    rate_limit: int = 100
    rate_window: float = 60.0


@dataclass(frozen=True)
class BewaConfig:
    version: int = CONFIG_VERSION
    credibility: CredibilityParams = CredibilityParams()
    kernel: KernelParams = KernelParams()
    decay: DecayParams = DecayParams()
    reset: ResetParams = ResetParams()
    probation: ProbationConfig = ProbationConfig()
    graph: GraphParams = GraphParams()
    utility: UtilityConfig = UtilityConfig()
    service: ServiceConfig = ServiceConfig()
    method_rigour: Mapping[str, float] = field(default_factory=lambda: dict(METHOD_RIGOUR))


def _coerce(current: Any, value: Any) -> Any:
    if dataclasses.is_dataclass(current) and isinstance(value, Mapping):
        return override(current, value)
    if isinstance(current, tuple) and isinstance(value, list):
        return tuple(value)
    return value


def override(obj: Any, values: Mapping[str, Any]) -> Any:
    """Return a copy of dataclass ``obj`` with ``values`` applied recursively."""
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, value in values.items():
        if key not in names:
            raise KeyError(f"unknown config key {type(obj).__name__}.{key}")
        if key == "apps":
            value = tuple(AppConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in a.items()}) for a in value)
        elif key == "cross_map":
            value = {k: frozenset(v) for k, v in value.items()}
        changes[key] = _coerce(getattr(obj, key), value)
    return dataclasses.replace(obj, **changes)


def load_config(path: str | Path | None = None, values: Mapping[str, Any] | None = None) -> BewaConfig:
    cfg = BewaConfig()
    if path is not None:
        cfg = override(cfg, read_mapping(path))
    if values:
        cfg = override(cfg, values)
    return cfg


def read_mapping(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".toml":
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text)


def to_dict(cfg: Any) -> Any:
    if dataclasses.is_dataclass(cfg):
        return {f.name: to_dict(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}
    if isinstance(cfg, (tuple, list, frozenset, set)):
        items = [to_dict(x) for x in cfg]
        return sorted(items) if isinstance(cfg, (frozenset, set)) else items
    if isinstance(cfg, Mapping):
        return {k: to_dict(v) for k, v in cfg.items()}
    return cfg
