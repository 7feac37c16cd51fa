"""Flat, typed experiment configuration stored as TOML.

Every key has a declared type and default; unknown keys and wrong types are
rejected.  ``dumps`` writes every key, so load(dumps(c)) == c.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomlkit
from tomlkit.exceptions import ParseError

KINDS = ("decompose", "randomize", "evolve", "norms", "montecarlo", "energy_audit", "perturb")
DATUMS = ("gaussian", "band_limited", "zero")
FAMILIES = ("rademacher", "standard_gaussian", "uniform_pm", "ones")
NORM_NAMES = ("V", "W", "Wdot", "R", "Rdot", "X", "Y", "Z")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int = 0
    out: str = "dlab-out"
    workers: int = 1
    check: bool = False
    # grid
    dim: int = 1
    box_length: float = 32.0
    points: int = 256
    d_param: float = 7.0
    # datum
    datum: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    band: float = 4.0
    corpus: int = 1
    # randomization
    family: str = "rademacher"
    m_min: float = 0.0  # 0 means no lower cut
    m_max: float = 0.0  # 0 means no upper cut
    k_max: int = 8
    j_radius: float = 4.0
    s: float = 0.75
    trials: int = 100
    betas: list = field(default_factory=lambda: [2, 4, 8])
    strichartz_q: float = 8.0
    strichartz_p: float = 4.0
    strichartz_p0: float = 4.0
    window: float = 0.5
    snapshots: int = 17
    # solver
    level: int = 4
    coupling: float = 1.0
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 1e-3
    stride: int = 10
    forcing_amplitude: float = 0.0
    forcing_shift: float = 3.0
    forcing_level: int = -1  # -1 means untruncated
    # norms
    norms: list = field(default_factory=lambda: ["V", "Wdot", "X"])
    trajectory: str = ""
    # audit and perturbation
    audit_t1: float = 0.0
    audit_t2: float = 1.0
    audit_tol: float = 1e-6
    eps: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    smallness: float = 0.1
    eta: float = 0.1
    delta: float = 0.1
    sigma: float = 0.01

    def __post_init__(self) -> None:
        validate(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @property
    def forcing_truncation(self) -> int | None:
        return None if self.forcing_level < 0 else self.forcing_level


def _plain(value):
    return list(value) if isinstance(value, (list, tuple)) else value


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_LIST_ITEM = {"betas": int, "eps": float, "norms": str}


def _default(name: str):
    f = _FIELDS[name]
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return None


def _expected_type(name: str):
    default = _default(name)
    if name == "kind":
        return str
    return type(default)


def _coerce(name: str, value):
    want = _expected_type(name)
    if want is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected a boolean, got {value!r}")
        return value
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return int(value)
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        return float(value)
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return str(value)
    if want is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name}: expected an array, got {value!r}")
        item = _LIST_ITEM[name]
        return [_coerce_item(name, item, v) for v in value]
    raise ConfigError(f"{name}: unsupported type")


def _coerce_item(name, item, v):
    if item is float and isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if item is int and isinstance(v, int) and not isinstance(v, bool):
        return int(v)
    if item is str and isinstance(v, str):
        return str(v)
    raise ConfigError(f"{name}: array entry {v!r} is not {item.__name__}")


def validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg.kind!r}")
    if cfg.datum not in DATUMS:
        raise ConfigError(f"datum must be one of {DATUMS}, got {cfg.datum!r}")
    if cfg.dim not in (1, 2, 3):
        raise ConfigError("dim must be 1, 2 or 3")
    if cfg.points < 8 or cfg.points & (cfg.points - 1):
        raise ConfigError("points must be a power of two >= 8")
    if not cfg.box_length > 0:
        raise ConfigError("box_length must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.trials < 1:
        raise ConfigError("trials must be ≥ 1")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"family must be one of {FAMILIES}, got {cfg.family!r}")
    bad = [n for n in cfg.norms if n not in NORM_NAMES]
    if bad:
        raise ConfigError(f"unknown norm names {bad}; choose from {NORM_NAMES}")
    if any(b < 2 or b % 2 for b in cfg.betas):
        raise ConfigError("betas must be even integers >= 2")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if not cfg.d_param > 2:
        raise ConfigError("d_param must exceed 2")
    if cfg.level < 1:
        raise ConfigError("level must be a positive integer")
    if not (cfg.dt > 0 and cfg.t1 > cfg.t0):
        raise ConfigError("need dt > 0 and t1 > t0")
    if cfg.snapshots < 2 or not cfg.window > 0:
        raise ConfigError("need snapshots >= 2 and window > 0")
    if cfg.stride < 1:
        raise ConfigError("stride must be >= 1")
    for name in ("amplitude", "width", "band", "eta", "delta", "sigma", "smallness", "audit_tol"):
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive and finite")


def from_mapping(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "kind" not in data:
        raise ConfigError("missing required key 'kind'")
    values = {}
    for name, raw in data.items():
        if isinstance(raw, dict):
            raise ConfigError(f"{name}: nested tables are not allowed; the config is flat")
        values[name] = _coerce(name, raw)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def loads(text: str) -> ExperimentConfig:
    try:
        doc = tomlkit.parse(text)
    except ParseError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return from_mapping(doc.unwrap())


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: ExperimentConfig) -> str:
    doc = tomlkit.document()
    for name, value in cfg.as_dict().items():
        doc.add(name, value)
    return tomlkit.dumps(doc)


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    changes = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg
