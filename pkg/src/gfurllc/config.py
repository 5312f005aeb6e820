"""Scenario parameters shared by the analytic and simulation engines.

Files are flat YAML mappings. Power quantities are given in dB/dBm and are
converted to linear units exactly once, here.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import yaml


class ConfigError(ValueError):
    """Raised for unreadable scenario files and invariant violations."""


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_mw(x_dbm: float) -> float:
    return db_to_lin(x_dbm)


# --------------------------------------------------------------------------- schemes


@dataclass(frozen=True)
class Reactive:
    name = "reactive"

    @property
    def reps(self) -> int:
        return 1


@dataclass(frozen=True)
class KRepetition:
    k: int
    name = "krep"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")

    @property
    def reps(self) -> int:
        return self.k


@dataclass(frozen=True)
class Proactive:
    k_max: int
    name = "proactive"

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ConfigError(f"k_max must be a positive integer, got {self.k_max!r}")

    @property
    def reps(self) -> int:
        return self.k_max


Scheme = Union[Reactive, KRepetition, Proactive]


def parse_scheme(name: str, k: int | None = None) -> Scheme:
    name = name.lower()
    if name in ("reactive", "reac"):
        return Reactive()
    if name in ("krep", "k-repetition", "krepetition"):
        return KRepetition(4 if k is None else k)
    if name in ("proactive", "proa"):
        return Proactive(8 if k is None else k)
    raise ConfigError(f"unknown scheme {name!r}")


def scheme_label(scheme: Scheme) -> str:
    if isinstance(scheme, Reactive):
        return "reactive"
    if isinstance(scheme, KRepetition):
        return f"krep{scheme.k}"
    return f"proactive{scheme.k_max}"


# --------------------------------------------------------------------------- config

_REQUIRED = (
    "lambda_b",
    "lambda_d",
    "p_a",
    "s_pilots",
    "rho_dbm",
    "gamma_th_db",
    "alpha",
    "sigma2_dbm",
    "power_ladder",
)
_DEFAULTS = {"tti_ms": 0.125, "sim_area_km2": 400.0, "seed": 0}
FIELDS = _REQUIRED + tuple(_DEFAULTS)


@dataclass(frozen=True)
class ScenarioConfig:
    lambda_b: float
    lambda_d: float
    p_a: float
    s_pilots: int
    rho_dbm: float
    gamma_th_db: float
    alpha: float
    sigma2_dbm: float
    power_ladder: tuple[float, ...]
    tti_ms: float = 0.125
    sim_area_km2: float = 400.0
    seed: int = 0
    # linear counterparts, filled in __post_init__
    rho: float = field(init=False, repr=False, compare=False)
    gamma_th: float = field(init=False, repr=False, compare=False)
    sigma2: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "power_ladder", tuple(float(g) for g in self.power_ladder))
        _validate(self)
        object.__setattr__(self, "rho", dbm_to_mw(self.rho_dbm))
        object.__setattr__(self, "gamma_th", db_to_lin(self.gamma_th_db))
        object.__setattr__(self, "sigma2", dbm_to_mw(self.sigma2_dbm))

    @property
    def lambda_a(self) -> float:
        return active_density(self)

    @property
    def load_ratio(self) -> float:
        """Co-pilot active UEs per BS, lambda_a / lambda_b."""
        return self.lambda_a / self.lambda_b

    @property
    def noise_to_target(self) -> float:
        """sigma^2 / rho in linear units."""
        return self.sigma2 / self.rho

    def power_level(self, m: int) -> float:
        """Power unit g_m of HARQ round m (1-based); rounds past the ladder reuse g_J."""
        if m < 1:
            raise ValueError(f"round index must be >= 1, got {m}")
        return self.power_ladder[min(m, len(self.power_ladder)) - 1]

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return from_mapping({**to_mapping(self), **changes})

    def digest(self) -> str:
        blob = json.dumps(to_mapping(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def active_density(cfg: ScenarioConfig) -> float:
    """Density of active UEs sharing one pilot, p_a * lambda_d / S."""
    return cfg.p_a * cfg.lambda_d / cfg.s_pilots


def _validate(cfg: ScenarioConfig) -> None:
    for name in ("lambda_b", "lambda_d"):
        if not getattr(cfg, name) > 0:
            raise ConfigError(f"{name} must be > 0, got {getattr(cfg, name)!r}")
    if not 0.0 <= cfg.p_a <= 1.0:
        raise ConfigError(f"p_a out of [0,1]: {cfg.p_a!r}")
    if int(cfg.s_pilots) != cfg.s_pilots or cfg.s_pilots < 1:
        raise ConfigError(f"s_pilots must be a positive integer, got {cfg.s_pilots!r}")
    if not cfg.alpha > 2:
        raise ConfigError(f"alpha must be > 2, got {cfg.alpha!r}")
    ladder = cfg.power_ladder
    if not ladder:
        raise ConfigError("power_ladder must be nonempty")
    if any(not g > 0 for g in ladder):
        raise ConfigError(f"power_ladder entries must be > 0, got {list(ladder)}")
    if any(b < a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError(f"power_ladder must be nondecreasing, got {list(ladder)}")
    for name in ("rho_dbm", "gamma_th_db", "sigma2_dbm"):
        if not math.isfinite(getattr(cfg, name)):
            raise ConfigError(f"{name} must be finite")
    if not cfg.tti_ms > 0:
        raise ConfigError(f"tti_ms must be > 0, got {cfg.tti_ms!r}")
    if not cfg.sim_area_km2 > 0:
        raise ConfigError(f"sim_area_km2 must be > 0, got {cfg.sim_area_km2!r}")
    if int(cfg.seed) != cfg.seed or not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {cfg.seed!r}")


def _coerce(name: str, value: Any) -> Any:
    try:
        if name == "power_ladder":
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split()]
            if isinstance(value, (int, float)):
                value = [value]
            return tuple(float(v) for v in value)
        if name in ("s_pilots", "seed"):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None


def from_mapping(data: Mapping[str, Any]) -> ScenarioConfig:
    unknown = sorted(set(data) - set(FIELDS))
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    values = {**_DEFAULTS, **data}
    return ScenarioConfig(**{k: _coerce(k, values[k]) for k in FIELDS})


def to_mapping(cfg: ScenarioConfig) -> dict[str, Any]:
    out = {}
    for f in dataclasses.fields(cfg):
        if not f.init:
            continue
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: parse failure: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key-value mapping")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"{path}: field {k!r} is nested; the format is flat")
    return from_mapping(data)


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(to_mapping(cfg), sort_keys=False, default_flow_style=None)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(cfg))


def baseline(**overrides: Any) -> ScenarioConfig:
    """The reference scenario used throughout the numerical study."""
    data = dict(
        lambda_b=1.0,
        lambda_d=20000.0,
        p_a=0.0011,
        s_pilots=48,
        rho_dbm=-130.0,
        gamma_th_db=-2.0,
        alpha=4.0,
        sigma2_dbm=-126.2,  # -174 + 10 log10(60 kHz), rounded
        power_ladder=[1.0],
    )
    data.update(overrides)
    return from_mapping(data)


def apply_overrides(cfg: ScenarioConfig, overrides: Sequence[str]) -> ScenarioConfig:
    """Apply ``key=value`` strings (YAML-parsed values) on top of ``cfg``."""
    changes = {}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        key = key.strip()
        if key not in FIELDS:
            raise ConfigError(f"unknown field in override: {key!r}")
        changes[key] = yaml.safe_load(raw) if key != "power_ladder" else raw
    return cfg.replace(**changes) if changes else cfg
