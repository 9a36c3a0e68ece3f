"""Simulation configuration: TOML loading, strict validation, defaults."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .mobility import LevyParams
from .radio import RadioParams


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    rings: int = 1
    inter_site_distance: float = 500.0
    bandwidth_hz: float = 1.5e6


@dataclass
class RadioConfig:
    reference_distance: float = 1.0
    path_loss_exponent: float = 3.0
    reference_snr: float = 1e6
    hysteresis_margin: float = 0.1
    shadowing_std_db: float = 0.0

    def params(self) -> RadioParams:
        return RadioParams(**dataclasses.asdict(self))


@dataclass
class MobilityConfig:
    tail_exponent: float = 1.5
    min_flight: float = 1.0
    max_flight: float = 100.0
    speed: float = 1.5

    def params(self) -> LevyParams:
        return LevyParams(**dataclasses.asdict(self))


@dataclass
class DatasetConfig:
    """Where a dataset type's samples come from.

    ``source = "synth"`` draws Gaussian blobs; ``source = "idx"`` reads IDX files.
    """
    source: str = "synth"
    n_classes: int = 10
    n_features: int = 196
    separation: float = 6.0
    noise_std: float = 0.1
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""


@dataclass
class ServiceConfig:
    name: str = ""
    dataset_type: str = "mnist"
    n_clients: int = 16
    deadline: float = 30.0
    weight: float = 30.0
    alpha: float = 10.0
    target_accuracy: float = 0.9
    recruitment_budget: float = 0.0


@dataclass
class FLConfig:
    hidden_layers: list[int] = field(default_factory=lambda: [64])
    learning_rate: float = 0.05
    batch_size: int = 32
    local_iterations: int = 30
    rounds: int = 10
    samples_per_client: int = 600
    test_samples_per_class: int = 100
    pool_to: int = 14
    bits_per_param: int = 32
    payload_bits: float = 0.0
    compute_time_min: float = 2.0
    compute_time_max: float = 8.0
    downlink_delay: float = 0.0
    deadline_includes_compute: bool = True


@dataclass
class EAppConfig:
    window: int = 3
    horizon: float = 10.0
    epochs: int = 200
    learning_rate: float = 0.01
    hidden_layers: list[int] = field(default_factory=lambda: [32, 32])
    batch_size: int = 32
    refresh_period: float = 0.0


@dataclass
class ControlConfig:
    mac_dt: float = 0.010
    nearrt_period: float = 3.0
    nonrt_period: float = 10.0
    warmup: float = 60.0
    f_min: float = 0.05
    objective: str = "sum"
    mac_order: str = "gain"
    mac_use_true_position: bool = False
    log_mac_ticks: bool = False


@dataclass
class SimConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    datasets: dict[str, DatasetConfig] = field(default_factory=dict)
    services: list[ServiceConfig] = field(default_factory=list)
    fl: FLConfig = field(default_factory=FLConfig)
    eapp: EAppConfig = field(default_factory=EAppConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    n_clients: int = 32
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "SimConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"mobility.speed": 0})``."""
        d = self.to_dict()
        for path, value in changes.items():
            node = d
            *head, last = path.split(".")
            for key in head:
                node = node[int(key)] if isinstance(node, list) else node[key]
            if isinstance(node, list):
                node[int(last)] = value
            else:
                node[last] = value
        return from_dict(d)


_SECTIONS = {
    "topology": TopologyConfig, "radio": RadioConfig, "mobility": MobilityConfig,
    "fl": FLConfig, "eapp": EAppConfig, "control": ControlConfig,
}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key '{where}.{key}'")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"'{where}.{key}' must be true or false")
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{where}.{key}' must be a number")
            if isinstance(default, int) and not isinstance(default, bool) \
                    and isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"'{where}.{key}' must be an integer")
            value = type(default)(value)
        elif isinstance(default, list):
            if not isinstance(value, list):
                raise ConfigError(f"'{where}.{key}' must be a list")
            value = [int(v) for v in value]
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"'{where}.{key}' must be a string")
        kwargs[key] = value
    return cls(**kwargs)


def from_dict(data: dict) -> SimConfig:
    data = dict(data)
    kwargs = {}
    for key in list(data):
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], data.pop(key), key)
        elif key == "datasets":
            raw = data.pop(key)
            if not isinstance(raw, dict):
                raise ConfigError("'datasets' must be a table of dataset types")
            kwargs[key] = {name: _build(DatasetConfig, v, f"datasets.{name}")
                           for name, v in raw.items()}
        elif key == "services":
            raw = data.pop(key)
            if not isinstance(raw, list):
                raise ConfigError("'services' must be an array of tables")
            kwargs[key] = [_build(ServiceConfig, v, f"services[{i}]") for i, v in enumerate(raw)]
        elif key in ("n_clients", "seed"):
            v = data.pop(key)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"'{key}' must be an integer")
            kwargs[key] = v
        else:
            raise ConfigError(f"unknown key '{key}'")
    cfg = SimConfig(**kwargs)
    validate(cfg)
    return cfg


def _multiple(period: float, dt: float) -> bool:
    ratio = period / dt
    return abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1


def validate(cfg: SimConfig) -> None:
    """Re-check every cross-module constraint; raise ConfigError naming the key."""
    c = cfg.control
    if c.mac_dt <= 0:
        raise ConfigError("'control.mac_dt' must be > 0")
    for key in ("nearrt_period", "nonrt_period"):
        if not _multiple(getattr(c, key), c.mac_dt):
            raise ConfigError(f"'control.{key}' must be a positive multiple of control.mac_dt")
    if c.warmup < 0 or not (c.warmup == 0 or _multiple(c.warmup, c.mac_dt)):
        raise ConfigError("'control.warmup' must be a non-negative multiple of control.mac_dt")
    if c.objective not in ("sum", "max"):
        raise ConfigError("'control.objective' must be 'sum' or 'max'")
    if c.mac_order not in ("gain", "cheapest"):
        raise ConfigError("'control.mac_order' must be 'gain' or 'cheapest'")
    if not 0 <= c.f_min <= 1:
        raise ConfigError("'control.f_min' must lie in [0, 1]")
    if not cfg.services:
        raise ConfigError("'services' must list at least one service")
    if c.f_min * len(cfg.services) > 1:
        raise ConfigError("'control.f_min' times the number of services exceeds 1")
    if sum(s.n_clients for s in cfg.services) > cfg.n_clients:
        raise ConfigError("'services.n_clients' sum exceeds 'n_clients'")
    if cfg.n_clients < 1:
        raise ConfigError("'n_clients' must be >= 1")
    t = cfg.topology
    if t.rings < 0:
        raise ConfigError("'topology.rings' must be >= 0")
    if t.inter_site_distance <= 0:
        raise ConfigError("'topology.inter_site_distance' must be > 0")
    if t.bandwidth_hz <= 0:
        raise ConfigError("'topology.bandwidth_hz' must be > 0")
    try:
        cfg.radio.params()
    except ValueError as e:
        raise ConfigError(f"radio: {e}") from None
    try:
        cfg.mobility.params()
    except ValueError as e:
        raise ConfigError(f"mobility: {e}") from None
    for i, s in enumerate(cfg.services):
        if s.deadline <= 0:
            raise ConfigError(f"'services[{i}].deadline' must be > 0")
        if s.weight <= 0:
            raise ConfigError(f"'services[{i}].weight' must be > 0")
        if s.alpha <= 0:
            raise ConfigError(f"'services[{i}].alpha' must be > 0")
        if s.n_clients < 1:
            raise ConfigError(f"'services[{i}].n_clients' must be >= 1")
        if s.dataset_type not in cfg.datasets:
            raise ConfigError(f"'services[{i}].dataset_type' {s.dataset_type!r} has no [datasets] entry")
    if len({s.dataset_type for s in cfg.services}) != len(cfg.services):
        raise ConfigError("'services.dataset_type' must be distinct per service")
    for name, d in cfg.datasets.items():
        if d.source not in ("synth", "idx"):
            raise ConfigError(f"'datasets.{name}.source' must be 'synth' or 'idx'")
        if d.source == "idx":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(d, key):
                    raise ConfigError(f"'datasets.{name}.{key}' is required for idx sources")
        if d.n_classes < 1 or d.n_features < 1:
            raise ConfigError(f"'datasets.{name}' needs n_classes and n_features >= 1")
    f = cfg.fl
    if f.rounds < 1:
        raise ConfigError("'fl.rounds' must be >= 1")
    if f.local_iterations < 0:
        raise ConfigError("'fl.local_iterations' must be >= 0")
    if f.batch_size < 1:
        raise ConfigError("'fl.batch_size' must be >= 1")
    if f.learning_rate < 0:
        raise ConfigError("'fl.learning_rate' must be >= 0")
    if not 0 < f.compute_time_min <= f.compute_time_max:
        raise ConfigError("'fl.compute_time_min' must be > 0 and <= 'fl.compute_time_max'")
    if f.samples_per_client < 1:
        raise ConfigError("'fl.samples_per_client' must be >= 1")
    if f.payload_bits < 0:
        raise ConfigError("'fl.payload_bits' must be >= 0")
    if f.downlink_delay < 0:
        raise ConfigError("'fl.downlink_delay' must be >= 0")
    e = cfg.eapp
    if e.window < 2:
        raise ConfigError("'eapp.window' must be >= 2")
    if e.horizon <= 0:
        raise ConfigError("'eapp.horizon' must be > 0")
    if len(e.hidden_layers) != 2:
        raise ConfigError("'eapp.hidden_layers' must list exactly two widths")
    if e.epochs < 0:
        raise ConfigError("'eapp.epochs' must be >= 0")


DEFAULT_CONFIG_PATH = Path(__file__).with_name("default.toml")


def parse_config(path) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    return from_dict(data)


def default_config() -> SimConfig:
    return parse_config(DEFAULT_CONFIG_PATH)


def reference_text() -> str:
    """Every key with its default, as a commented TOML document."""
    lines = ["# Configuration reference: every key with its default value.", ""]

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    lines += ["n_clients = 32", "seed = 0", ""]
    for name, cls in _SECTIONS.items():
        lines.append(f"[{name}]")
        for f in dataclasses.fields(cls):
            lines.append(f"{f.name} = {fmt(getattr(cls(), f.name))}")
        lines.append("")
    lines.append("[datasets.<dataset_type>]")
    for f in dataclasses.fields(DatasetConfig):
        lines.append(f"{f.name} = {fmt(getattr(DatasetConfig(), f.name))}")
    lines += ["", "[[services]]  # repeat once per FL service"]
    for f in dataclasses.fields(ServiceConfig):
        lines.append(f"{f.name} = {fmt(getattr(ServiceConfig(), f.name))}")
    return "\n".join(lines) + "\n"
