"""
Simulation configuration: dataclasses, YAML loading and validation.

Every field has a default, so an empty file is a valid configuration. The
YAML layout mirrors the dataclasses one section per nested dataclass; see
``configs/`` for annotated examples.
"""
from dataclasses import dataclass, field, fields, is_dataclass, asdict
import copy
import math

import yaml

from .controller import ControllerGains
from .motor import DomainError, MotorParams
from .observer import ObserverGains
from .sun import DisturbanceSpec, Site, AXES, parse_date


class ConfigError(DomainError):
    """Invalid configuration; the message starts with the offending field."""


SCENARIOS = ("step", "ramp", "sine", "sun-day")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "step"
    amplitude: tuple = (5.5, 4.9)
    rate: tuple = (0.1, 0.05)
    frequency: float = 0.1
    t0: float = 0.0
    site: Site = field(default_factory=Site)
    date: str = "2024-06-21"
    start: float = 43200.0
    sample_dt: float = 1.0
    speed_limit: float = math.pi
    gear_ratio: float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise DomainError(f"kind must be one of {SCENARIOS}, got {self.kind!r}")
        for name in ("amplitude", "rate"):
            value = getattr(self, name)
            if len(value) != 2:
                raise DomainError(f"{name} needs one value per axis {AXES}")
            object.__setattr__(self, name, tuple(float(v) for v in value))
        parse_date(self.date)
        for name in ("frequency", "sample_dt", "speed_limit", "gear_ratio"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")


@dataclass(frozen=True)
class InitialSpec:
    """
    Initial plant and observer state. ``theta=None`` starts each axis on its
    reference at t=0 (at zero for a step); ``i_q=None`` starts with the
    current that holds the load.
    """

    theta: tuple | None = None
    omega: tuple = (0.0, 0.0)
    i_d: tuple = (0.0, 0.0)
    i_q: tuple | None = None
    observer_offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name in ("theta", "omega", "i_d", "i_q", "observer_offset"):
            value = getattr(self, name)
            if value is None:
                continue
            if len(value) != 2 or not all(math.isfinite(float(v)) for v in value):
                raise DomainError(f"{name} needs two finite values")
            object.__setattr__(self, name, tuple(float(v) for v in value))


@dataclass(frozen=True)
class SimConfig:
    motors: dict = field(default_factory=lambda: {ax: MotorParams() for ax in AXES})
    controller: ControllerGains = field(default_factory=ControllerGains)
    observer: ObserverGains = field(default_factory=ObserverGains)
    sensorless: bool = True
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    dt: float = 1e-4
    dt_max: float = 1e-3
    duration: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if set(self.motors) != set(AXES):
            raise ConfigError(f"motors: need exactly the axes {AXES}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt: dt must be > 0, got {self.dt!r}")
        if self.dt > self.dt_max:
            raise ConfigError(f"dt: dt={self.dt} exceeds dt_max={self.dt_max}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ConfigError(f"duration: duration must be > 0, got {self.duration!r}")
        if not isinstance(self.sensorless, bool):
            raise ConfigError("sensorless: must be true or false")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def to_dict(self):
        return _plain(asdict(self))

    def with_overrides(self, overrides):
        """Copy with dotted-path overrides, e.g. ``{"controller.U0": 30}``."""
        d = self.to_dict()
        for path, value in overrides.items():
            node = d
            *head, last = path.split(".")
            for key in head:
                if not isinstance(node.get(key), dict):
                    raise ConfigError(f"{path}: no such section {key!r}")
                node = node[key]
            if last not in node:
                raise ConfigError(f"{path}: unknown field")
            node[last] = value
        return config_from_dict(d)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field" if path else f"{unknown[0]}: unknown field")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        f = known[name]
        if isinstance(f.default_factory, type) and is_dataclass(f.default_factory):
            kwargs[name] = _build(f.default_factory, value, sub)
        elif f.type is float or f.type == float | None:
            kwargs[name] = _number(value, sub, optional=f.type != float)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (DomainError, TypeError, ValueError) as exc:
        field_name = _field_in_message(str(exc), known)
        where = f"{path}.{field_name}" if field_name and path else (field_name or path or "config")
        raise ConfigError(f"{where}: {exc}") from None


def _number(value, where, optional):
    if value is None and optional:
        return None
    # bool is an int subclass; None and bools are never numbers here
    if value is None or isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    try:
        # YAML 1.1 reads 1.0e6 (no exponent sign) as a string
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _field_in_message(msg, known):
    head = msg.split(" ", 1)[0]
    return head if head in known else None


def config_from_dict(data):
    """Build and validate a :class:`SimConfig` from plain data."""
    data = copy.deepcopy(data) if data else {}
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    shared = data.pop("motor", None)
    motors_in = data.pop("motors", None) or {}
    if not isinstance(motors_in, dict):
        raise ConfigError("motors: expected a mapping of axis -> parameters")
    unknown = sorted(set(motors_in) - set(AXES))
    if unknown:
        raise ConfigError(f"motors.{unknown[0]}: unknown axis")
    motors = {}
    for ax in AXES:
        merged = dict(shared or {})
        merged.update(motors_in.get(ax) or {})
        motors[ax] = _build(MotorParams, merged, f"motors.{ax}")
    data["motors"] = motors
    return _build(SimConfig, data, "")


def load_config(path):
    """
    Read a YAML config file.

    Raises
    ------
    ConfigError
        Missing file, YAML syntax error or invalid field.
    """
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
