"""Layered run configuration: file defaults < environment < CLI overrides.

The defaults are the published operating point of the method: embedding
dimension 512, temperature 0.1, unit concept-loss weight, top-5 objects,
Adam at 1e-4 with 1e-4 weight decay, 10 epochs with warm-up then cosine
annealing. Unknown keys are rejected by exact name so typos never silently
fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

ENV_PREFIX = "ZSAR_"


@dataclass
class TrainConfig:
    embed_dim: int = 512
    hidden_dim: int = 64
    d_st: int = 2048
    temperature: float = 0.1
    er_weight: float = 1.0
    n_objects: int = 5
    base_lr: float = 1e-4
    weight_decay: float = 1e-4
    epochs: int = 10
    warmup_fraction: float = 0.1
    batch_size: int = 64
    seed: int = 0
    average_loss_heads: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    deterministic: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.er_weight < 0:
            raise ConfigError("er_weight must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: f.type if isinstance(f.type, type) else type(f.default)
                for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(
                "unknown config keys: " + ", ".join(repr(k) for k in unknown)
                + "; valid keys: " + ", ".join(sorted(known)))
        return cls(**values)


def _parse_value(raw: str, target_type: type):
    if target_type is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {target_type.__name__}") from exc


def load_config(path: str | Path | None = None,
                overrides: list[str] | None = None,
                env: dict | None = None) -> TrainConfig:
    """Merge file, ZSAR_* environment variables, and key=value overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            file_values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"{path}: config root must be an object")
        values.update(file_values)

    types = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    concrete = {name: type(getattr(TrainConfig(), name)) for name in types}
    for name in types:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _parse_value(env[env_key], concrete[name])

    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in concrete:
            raise ConfigError(
                f"unknown config key {key!r}; valid keys: "
                + ", ".join(sorted(concrete)))
        values[key] = _parse_value(raw, concrete[key])

    return TrainConfig.from_dict(values)


def config_hash(config: TrainConfig | dict) -> str:
    """Stable short hash identifying the producing configuration."""
    payload = config.to_dict() if isinstance(config, TrainConfig) else dict(config)
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
