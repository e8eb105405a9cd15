"""Strict JSON configuration for runs, sweeps, verification and MMS studies.

Every section and key is optional; missing entries take the defaults of
`reference_config`. Unknown keys are errors. Problems are reported as
`ConfigError` whose message starts with the JSON pointer of the entry.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable

from ._dynamics import WALL_MODES, Stabilization, StepControl
from ._grid import GridSpec
from ._state import COEFF_NAMES, PROFILES, InitialDataSpec, InitialMode, PhysicalParams

if TYPE_CHECKING:
    from collections.abc import Mapping

DEFAULT_EPSILONS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
MAX_NORM_ORDER = 3


class ConfigError(ValueError):
    """Invalid configuration; ``str()`` starts with the JSON pointer."""

    def __init__(self, pointer: str, message: str) -> None:
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


@dataclass(frozen=True)
class PhysicsConfig:
    mu: float = 1.0
    lambda_: float = 0.0
    gamma: float = 1.4
    ideal_wall: str = "no-slip"

    def params(self, epsilon: float) -> PhysicalParams:
        return PhysicalParams(epsilon, self.mu, self.lambda_, self.gamma)


@dataclass(frozen=True)
class TimeConfig:
    horizon: float = 0.5
    cfl_adv: float = 0.4
    cfl_visc: float = 0.25
    store_dt: float = 0.01
    report_dt: float = 0.05
    dt_cap: float | None = None

    @property
    def control(self) -> StepControl:
        return StepControl(self.cfl_adv, self.cfl_visc, self.dt_cap)

    @property
    def report_every(self) -> int:
        """Number of store intervals per report interval."""
        return round(self.report_dt / self.store_dt)


@dataclass(frozen=True)
class NormsConfig:
    m: int = 2
    alpha0_max: int = 2

    @property
    def ring_capacity(self) -> int:
        # residuals need at least one centred time difference
        return max(2 * self.alpha0_max + 1, 3)


@dataclass(frozen=True)
class SweepSettings:
    epsilon_list: tuple[float, ...] = DEFAULT_EPSILONS
    workers: int = 1


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "mhd-output"
    dump_fields: bool = False


@dataclass(frozen=True)
class SweepConfig:
    """Complete, validated configuration shared by every run of a sweep."""

    grid: GridSpec = GridSpec()
    physics: PhysicsConfig = PhysicsConfig()
    initial: InitialDataSpec = InitialDataSpec()
    time: TimeConfig = TimeConfig()
    norms: NormsConfig = NormsConfig()
    sweep: SweepSettings = SweepSettings()
    stabilization: Stabilization = Stabilization()
    output: OutputConfig = OutputConfig()

    @property
    def epsilon_list(self) -> tuple[float, ...]:
        return self.sweep.epsilon_list

    @property
    def horizon(self) -> float:
        return self.time.horizon

    @property
    def m(self) -> int:
        return self.norms.m

    @property
    def output_dir(self) -> Path:
        return Path(self.output.dir)

    def replace(self, **sections: Any) -> SweepConfig:
        return dataclasses.replace(self, **sections)


# --------------------------------- parsing ------------------------------------

Converter = Callable[[Any, str], Any]


def _number(value: Any, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(pointer, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(pointer, f"expected a finite number, got {value!r}")
    return float(value)


def _integer(value: Any, pointer: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(pointer, f"expected an integer, got {value!r}")
    return value


def _string(value: Any, pointer: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(pointer, f"expected a string, got {value!r}")
    return value


def _boolean(value: Any, pointer: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(pointer, f"expected true or false, got {value!r}")
    return value


def _optional_number(value: Any, pointer: str) -> float | None:
    return None if value is None else _number(value, pointer)


def _epsilons(value: Any, pointer: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(pointer, f"expected a non-empty list, got {value!r}")
    out = tuple(_number(v, f"{pointer}/{i}") for i, v in enumerate(value))
    for i, eps in enumerate(out):
        if not 0 < eps <= 1:
            raise ConfigError(f"{pointer}/{i}", f"must lie in (0, 1], got {eps}")
    for i in range(1, len(out)):
        if not out[i] < out[i - 1]:
            raise ConfigError(f"{pointer}/{i}", "must be strictly decreasing")
    return out


def _object(value: Any, pointer: str, keys: Mapping[str, Any]) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(pointer, f"expected an object, got {type(value).__name__}")
    for key in value:
        if key not in keys:
            raise ConfigError(
                f"{pointer}/{key}", f"unknown key; expected one of {sorted(keys)}"
            )
    return value


def _coeffs(value: Any, pointer: str) -> dict[str, float]:
    obj = _object(value, pointer, dict.fromkeys(COEFF_NAMES))
    return {k: _number(v, f"{pointer}/{k}") for k, v in obj.items()}


_MODE_KEYS: dict[str, Converter] = {
    "kx": _integer,
    "profile": _string,
    "coeffs": _coeffs,
}


def _modes(value: Any, pointer: str) -> tuple[InitialMode, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(pointer, f"expected a non-empty list of modes, got {value!r}")
    modes = []
    for i, raw in enumerate(value):
        here = f"{pointer}/{i}"
        obj = _object(raw, here, _MODE_KEYS)
        kwargs = {k: _MODE_KEYS[k](v, f"{here}/{k}") for k, v in obj.items()}
        if kwargs.get("profile", "standard") not in PROFILES:
            raise ConfigError(f"{here}/profile", f"must be one of {list(PROFILES)}")
        modes.append(_build(InitialMode, kwargs, here))
    return tuple(modes)


def _wall(value: Any, pointer: str) -> str:
    wall = _string(value, pointer)
    if wall not in WALL_MODES:
        raise ConfigError(pointer, f"must be one of {list(WALL_MODES)}, got {wall!r}")
    return wall


#: section -> config key -> (dataclass field, converter)
_SCHEMA: dict[str, dict[str, tuple[str, Converter]]] = {
    "grid": {
        "nx": ("nx", _integer),
        "ny": ("ny", _integer),
        "length_x": ("length_x", _number),
        "ymax": ("ymax", _number),
        "stretch_beta": ("stretch_beta", _number),
    },
    "physics": {
        "mu": ("mu", _number),
        "lambda": ("lambda_", _number),
        "gamma": ("gamma", _number),
        "ideal_wall": ("ideal_wall", _wall),
    },
    "initial": {
        "amplitude": ("amplitude", _number),
        "modes": ("modes", _modes),
    },
    "time": {
        "horizon": ("horizon", _number),
        "cfl_adv": ("cfl_adv", _number),
        "cfl_visc": ("cfl_visc", _number),
        "store_dt": ("store_dt", _number),
        "report_dt": ("report_dt", _number),
        "dt_cap": ("dt_cap", _optional_number),
    },
    "norms": {"m": ("m", _integer), "alpha0_max": ("alpha0_max", _integer)},
    "sweep": {
        "epsilon_list": ("epsilon_list", _epsilons),
        "workers": ("workers", _integer),
    },
    "stabilization": {
        "filter_coeff": ("filter_coeff", _number),
        "sponge_fraction": ("sponge_fraction", _number),
        "sponge_time": ("sponge_time", _number),
    },
    "output": {"dir": ("dir", _string), "dump_fields": ("dump_fields", _boolean)},
}

_SECTION_TYPES: dict[str, type] = {
    "grid": GridSpec,
    "physics": PhysicsConfig,
    "initial": InitialDataSpec,
    "time": TimeConfig,
    "norms": NormsConfig,
    "sweep": SweepSettings,
    "stabilization": Stabilization,
    "output": OutputConfig,
}


def _construct(cls: type, kwargs: dict[str, Any]) -> Any:
    obj = cls(**kwargs)
    if isinstance(obj, GridSpec):
        obj.validate()
    return obj


def _offending_field(cls: type, kwargs: dict[str, Any]) -> str | None:
    """The first given field whose default alone makes `kwargs` valid."""
    defaults = {
        f.name: f.default
        for f in dataclasses.fields(cls)
        if f.default is not dataclasses.MISSING
    }
    for name in kwargs:
        if name not in defaults:
            continue
        try:
            _construct(cls, {**kwargs, name: defaults[name]})
        except ValueError:
            continue
        return name
    return None


def _build(cls: type, kwargs: dict[str, Any], pointer: str) -> Any:
    """Construct `cls`, reporting a ValueError at the offending key."""
    try:
        return _construct(cls, kwargs)
    except ValueError as e:
        msg = str(e)
    field = _offending_field(cls, kwargs)
    keys = {f: key for key, (f, _) in _SCHEMA.get(pointer[1:], {}).items()}
    if field is None:
        raise ConfigError(pointer, msg)
    raise ConfigError(f"{pointer}/{keys.get(field, field)}", msg)


def _check_section(name: str, obj: Any) -> None:
    if name == "physics":
        kwargs = {"mu": obj.mu, "lambda_": obj.lambda_, "gamma": obj.gamma}
        _build(PhysicalParams, kwargs, "/physics")
    elif name == "time":
        t: TimeConfig = obj
        for key in ("horizon", "store_dt", "report_dt"):
            value = getattr(t, key)
            if not value > 0:
                raise ConfigError(f"/time/{key}", f"must be positive, got {value}")
        kwargs = {"cfl_adv": t.cfl_adv, "cfl_visc": t.cfl_visc, "dt_cap": t.dt_cap}
        _build(StepControl, kwargs, "/time")
        ratio = t.report_dt / t.store_dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ConfigError(
                "/time/report_dt", "must be an integer multiple of store_dt"
            )
    elif name == "norms":
        n: NormsConfig = obj
        if not 0 <= n.m <= MAX_NORM_ORDER:
            raise ConfigError(
                "/norms/m", f"must lie in [0, {MAX_NORM_ORDER}], got {n.m}"
            )
        if not 0 <= n.alpha0_max <= min(n.m, 2):
            raise ConfigError(
                "/norms/alpha0_max", f"must lie in [0, min(m, 2)], got {n.alpha0_max}"
            )
    elif name == "sweep" and obj.workers < 1:
        raise ConfigError("/sweep/workers", f"must be >= 1, got {obj.workers}")
    elif name == "output" and not obj.dir:
        raise ConfigError("/output/dir", "must not be empty")


def config_from_dict(doc: Any) -> SweepConfig:
    """Validate a decoded JSON document and build the configuration."""
    top = _object(doc, "", _SCHEMA)
    sections: dict[str, Any] = {}
    for name, keys in _SCHEMA.items():
        raw = _object(top.get(name, {}), f"/{name}", keys)
        kwargs = {
            keys[k][0]: keys[k][1](v, f"/{name}/{k}") for k, v in raw.items()
        }
        obj = _build(_SECTION_TYPES[name], kwargs, f"/{name}")
        _check_section(name, obj)
        sections[name] = obj
    return SweepConfig(**sections)


def parse_config(path: str | Path) -> SweepConfig:
    """Read and validate a JSON configuration file; ``"-"`` reads stdin."""
    try:
        if str(path) == "-":
            text = sys.stdin.read()
        else:
            text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("", f"cannot read {path}: {e}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON: {e}") from None
    return config_from_dict(doc)


def config_to_dict(config: SweepConfig) -> dict[str, Any]:
    """Canonical JSON-ready form; `config_from_dict` inverts it exactly."""
    out: dict[str, Any] = {}
    for name, keys in _SCHEMA.items():
        section = getattr(config, name)
        out[name] = {}
        for key, (field, _) in keys.items():
            value = getattr(section, field)
            if key == "modes":
                value = [
                    {"kx": m.kx, "profile": m.profile, "coeffs": dict(m.coeffs)}
                    for m in value
                ]
            elif key == "epsilon_list":
                value = list(value)
            out[name][key] = value
    return out


def reference_config() -> dict[str, Any]:
    """The default configuration, every key spelled out."""
    return config_to_dict(SweepConfig())
