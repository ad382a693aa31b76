"""Scenario configuration: a YAML (or JSON) file merged with command-line overrides."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any, Optional

import yaml

from .dynamics import CartesianState, Params
from .integrator import FORMULATIONS, MODELS, StepControl


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"field '{field}': {message}")
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    model: str = "dissipative"
    formulation: str = "cartesian"
    delta: float = 0.1
    c: float = 1.0
    alpha: Optional[float] = None
    u0: Optional[tuple[float, float]] = None
    v0: Optional[tuple[float, float]] = None
    r0: Optional[float] = None
    rdot0: Optional[float] = None
    momentum: Optional[float] = None
    t_end: float = 8.0
    rtol: float = 1e-10
    atol: float = 1e-12
    h_init: float = 1e-3
    h_min: float = 1e-14
    h_max: float = math.inf
    max_steps: int = 2_000_000
    cap_fraction: float = 0.01
    r_min: Optional[float] = None
    tol: Optional[float] = None
    suite: str = "theorems"
    out: Optional[str] = None
    report: Optional[str] = None
    plot: Optional[str] = None
    sweep: Optional[dict] = None

    # ---- derived objects -------------------------------------------------
    def params(self) -> Params:
        return Params(delta=self.delta, c=self.c, alpha=self.alpha)

    def step_control(self) -> StepControl:
        return StepControl(rtol=self.rtol, atol=self.atol, h_init=self.h_init, h_min=self.h_min,
                           h_max=self.h_max, max_steps=self.max_steps,
                           cap_fraction=self.cap_fraction)

    def cartesian_state(self) -> CartesianState:
        u0 = self.u0 if self.u0 is not None else (1.0, 0.0)
        v0 = self.v0 if self.v0 is not None else (0.0, 1.0)
        return CartesianState(t=0.0, u=u0, v=v0)

    def radial_data(self) -> tuple[float, float, float]:
        return (self.r0 if self.r0 is not None else 1.0,
                self.rdot0 if self.rdot0 is not None else 0.0,
                self.momentum if self.momentum is not None else 1.0)

    def as_dict(self) -> dict:
        d = {}
        for f in fields(self):
            if f.name in ("out", "report", "plot", "sweep"):
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = list(val)
            if isinstance(val, float) and not math.isfinite(val):
                val = str(val)
            d[f.name] = val
        return d

    # ---- validation --------------------------------------------------------
    def validate(self) -> "ScenarioConfig":
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}, got {self.model!r}")
        if self.formulation not in FORMULATIONS[:3]:
            raise ConfigError("formulation", f"must be one of {FORMULATIONS[:3]}, "
                                             f"got {self.formulation!r}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ConfigError("c", f"must be > 0, got {self.c!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ConfigError("delta", f"must be >= 0, got {self.delta!r}")
        if self.alpha is not None and not self.alpha >= 0:
            raise ConfigError("alpha", f"must be >= 0, got {self.alpha!r}")
        if self.model == "tired" and self.alpha is None:
            raise ConfigError("alpha", "required by the tired model")
        if self.model == "tired" and self.formulation != "cartesian":
            raise ConfigError("formulation", "the tired model is integrated in cartesian form only")
        cart = ("u0", "v0")
        rad = ("r0", "rdot0", "momentum")
        if self.formulation == "cartesian":
            for name in rad:
                if getattr(self, name) is not None:
                    raise ConfigError(name, "not valid with formulation 'cartesian' (use u0/v0)")
            s0 = self.cartesian_state()
            if math.hypot(*s0.u) == 0:
                raise ConfigError("u0", "must be nonzero (singular centre)")
        else:
            for name in cart:
                if getattr(self, name) is not None:
                    raise ConfigError(name, f"not valid with formulation {self.formulation!r} "
                                            "(use r0/rdot0/momentum)")
            r0, _, _ = self.radial_data()
            if not r0 > 0:
                raise ConfigError("r0", f"must be > 0, got {r0!r}")
        if not self.t_end > 0:
            raise ConfigError("t_end", f"must be > 0, got {self.t_end!r}")
        if not 0 < self.rtol < 1:
            raise ConfigError("rtol", f"must lie in (0, 1), got {self.rtol!r}")
        if not self.atol > 0:
            raise ConfigError("atol", f"must be > 0, got {self.atol!r}")
        if not 0 < self.h_min <= self.h_init <= self.h_max:
            raise ConfigError("h_init", "need 0 < h_min <= h_init <= h_max")
        if self.max_steps < 1:
            raise ConfigError("max_steps", "must be >= 1")
        if not self.cap_fraction > 0:
            raise ConfigError("cap_fraction", "must be > 0")
        if self.r_min is not None and not self.r_min > 0:
            raise ConfigError("r_min", f"must be > 0, got {self.r_min!r}")
        if self.tol is not None and not self.tol >= 0:
            raise ConfigError("tol", f"must be >= 0, got {self.tol!r}")
        if self.suite not in ("theorems", "all"):
            raise ConfigError("suite", f"must be 'theorems' or 'all', got {self.suite!r}")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(name: str, value: Any) -> Any:
    if value is None:
        return None
    kind = _FIELD_TYPES[name]
    try:
        if name in ("u0", "v0"):
            if isinstance(value, str):
                value = value.split(",")
            pair = tuple(float(x) for x in value)
            if len(pair) != 2:
                raise ValueError("expected two components X,Y")
            return pair
        if name == "sweep":
            if not isinstance(value, dict):
                raise ValueError("expected a mapping")
            return value
        if "int" in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("expected an integer")
            return int(value)
        if "float" in kind:
            if isinstance(value, bool):
                raise ValueError("expected a number")
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"cannot parse {value!r}: {exc}") from None


def from_mapping(data: dict, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    cfg = base or ScenarioConfig()
    updates = {}
    for key, value in data.items():
        name = str(key).replace("-", "_")
        if name not in _FIELD_TYPES:
            raise ConfigError(str(key), "unknown configuration key")
        updates[name] = _coerce(name, value)
    return replace(cfg, **updates)


def load(path: Optional[str], overrides: Optional[dict] = None) -> ScenarioConfig:
    """Read ``path`` (if given) and apply ``overrides``; flags win over the file."""
    cfg = ScenarioConfig()
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"malformed file {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping of keys to values")
        cfg = from_mapping(data, cfg)
    if overrides:
        cfg = from_mapping({k: v for k, v in overrides.items() if v is not None}, cfg)
    return cfg.validate()
