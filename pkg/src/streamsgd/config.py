"""Run configuration schema, strict JSON parsing, and labeled seed derivation.

Config files mirror SimConfig field-for-field. Parsing is fail-fast: unknown
keys are rejected by name so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .datagen import DatasetSpec
from .streams import RETENTION_POLICIES, RateDistribution

MODE_FIXED_BATCH = "fixed_batch"
MODE_RATE_MATCHED = "rate_matched"
MODES = (MODE_FIXED_BATCH, MODE_RATE_MATCHED)


class ConfigError(ValueError):
    """Invalid or malformed run configuration."""


@dataclass
class PartitionConfig:
    mode: str = "iid"
    labels_per_device: int = 1


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [32])
    augment_std: float = 0.05  # per-epoch feature noise, imitates fresh samples


@dataclass
class OptimizerConfig:
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    schedule: list[list[float]] = field(default_factory=list)  # [epoch, factor]
    base_global_batch: int | None = None  # None -> n_devices * 64

    def __post_init__(self):
        self.schedule = [[int(e), float(f)] for e, f in self.schedule]


@dataclass
class CompressionConfig:
    enabled: bool = False
    cr: float = 0.1
    delta: float = 0.3
    ewma_factor: float = 0.9
    raw_gate: bool = False


@dataclass
class InjectionSettings:
    enabled: bool = False
    alpha: float = 0.0
    beta: float = 0.0


@dataclass
class CostConfig:
    c0: float = 1.0  # fixed seconds per iteration
    c1: float = 0.001  # seconds per trained sample
    link_latency: float = 0.005
    link_bandwidth: float = 625e6  # bytes/sec (5 Gbps)


@dataclass
class SimConfig:
    n_devices: int
    rate_dist: RateDistribution
    dataset: DatasetSpec
    seed: int = 0
    mode: str = MODE_RATE_MATCHED
    fixed_batch: int = 64
    b_min: int = 8
    b_max: int = 1024
    retention: str = "persistence"
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    compression: CompressionConfig = field(default_factory=CompressionConfig)
    injection: InjectionSettings = field(default_factory=InjectionSettings)
    cost: CostConfig = field(default_factory=CostConfig)
    sample_bytes: int = 3072
    max_epochs: int | None = 50
    target_accuracy: float | None = None
    rate_jitter: bool = False  # resample device rates at every epoch boundary
    prefill_seconds: float = 0.0  # stream time elapsed before training starts


def validate(config: SimConfig) -> SimConfig:
    if config.n_devices < 1:
        raise ConfigError("n_devices must be >= 1")
    if config.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {config.mode!r}")
    if config.retention not in RETENTION_POLICIES:
        raise ConfigError(f"retention must be one of {RETENTION_POLICIES}")
    if config.fixed_batch < 1:
        raise ConfigError("fixed_batch must be >= 1")
    if not 1 <= config.b_min <= config.b_max:
        raise ConfigError("need 1 <= b_min <= b_max")
    if config.partition.mode not in ("iid", "noniid"):
        raise ConfigError(f"partition.mode must be iid or noniid")
    if config.optimizer.base_lr <= 0:
        raise ConfigError("optimizer.base_lr must be positive")
    if not 0.0 <= config.optimizer.momentum < 1.0:
        raise ConfigError("optimizer.momentum must lie in [0, 1)")
    if config.compression.enabled:
        if not 0.0 < config.compression.cr <= 1.0:
            raise ConfigError("compression.cr must lie in (0, 1]")
        if config.compression.delta < 0:
            raise ConfigError("compression.delta must be non-negative")
        if not 0.0 < config.compression.ewma_factor < 1.0:
            raise ConfigError("compression.ewma_factor must lie in (0, 1)")
    if config.injection.enabled:
        if not 0.0 <= config.injection.alpha <= 1.0:
            raise ConfigError("injection.alpha must lie in [0, 1]")
        if not 0.0 <= config.injection.beta <= 1.0:
            raise ConfigError("injection.beta must lie in [0, 1]")
    if config.cost.c0 <= 0:
        raise ConfigError("cost.c0 must be positive so the clock advances")
    if config.cost.c1 < 0:
        raise ConfigError("cost.c1 must be non-negative")
    if config.cost.link_latency < 0 or config.cost.link_bandwidth <= 0:
        raise ConfigError("cost link parameters out of range")
    if config.sample_bytes < 1:
        raise ConfigError("sample_bytes must be positive")
    if config.max_epochs is None and config.target_accuracy is None:
        raise ConfigError("set max_epochs and/or target_accuracy")
    if config.max_epochs is not None and config.max_epochs < 1:
        raise ConfigError("max_epochs must be >= 1")
    if config.target_accuracy is not None and not 0.0 < config.target_accuracy <= 1.0:
        raise ConfigError("target_accuracy must lie in (0, 1]")
    if config.prefill_seconds < 0:
        raise ConfigError("prefill_seconds must be non-negative")
    return config


_OPTIONAL_INT = {"base_global_batch", "max_epochs"}


def _from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields) - {"_comment"}
    if unknown:
        key = sorted(unknown)[0]
        where = f"{path}.{key}" if path else key
        raise ConfigError(f"unknown config key: {where}")
    kwargs = {}
    for name, f in fields.items():
        if name.startswith("_"):
            continue
        here = f"{path}.{name}" if path else name
        if name not in data:
            if (
                f.default is dataclasses.MISSING
                and f.default_factory is dataclasses.MISSING
            ):
                raise ConfigError(f"missing required config key: {here}")
            continue
        value = data[name]
        if name in _NESTED:
            kwargs[name] = _from_dict(_NESTED[name], value, here)
        else:
            kwargs[name] = _coerce(name, value, here)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


_NESTED = {
    "rate_dist": RateDistribution,
    "dataset": DatasetSpec,
    "partition": PartitionConfig,
    "model": ModelConfig,
    "optimizer": OptimizerConfig,
    "compression": CompressionConfig,
    "injection": InjectionSettings,
    "cost": CostConfig,
}

_SCHEMA_TYPES = {
    "n_devices": int, "seed": int, "fixed_batch": int, "b_min": int, "b_max": int,
    "sample_bytes": int, "labels_per_device": int, "n_classes": int,
    "feature_dim": int, "samples_per_class": int,
}


def _coerce(name: str, value, path: str):
    if value is None:
        if name in _OPTIONAL_INT or name == "target_accuracy":
            return None
        raise ConfigError(f"{path} must not be null")
    if name in _SCHEMA_TYPES or name in _OPTIONAL_INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer")
        return value
    return value


def parse_config(text: str) -> SimConfig:
    """Parse and validate a JSON config document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate(_from_dict(SimConfig, data, ""))


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(config: SimConfig) -> str:
    """Serialize a config so that parse(render(config)) == config."""
    return json.dumps(dataclasses.asdict(config), indent=2) + "\n"


def save_config(config: SimConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_config(config))


def derive_seed(master: int, label: str) -> int:
    """Stable per-subsystem seed from one master seed and a label."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
