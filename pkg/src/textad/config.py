"""Run configuration: every hyperparameter of a training run in one place.

A resolved config is serialized beside every checkpoint and report so a run
can be reproduced from its outputs alone. The embedding dimension is never
configured here; it is always read from the data.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigError, DataFormatError
from .losses import LOSS_VARIANTS, LossConfig, PriorSpec
from .model import ARCHITECTURES


@dataclass
class RunConfig:
    """Hyperparameters of one training run.

    Defaults: attention width 150, 5 heads, top 10% instances, margin 5,
    standard-normal prior with 5000 draws, learning rate 1e-6, batch size 16.
    """

    attention_width: int = 150
    head_count: int = 5
    k_fraction: float = 0.10
    margin: float = 5.0
    prior: PriorSpec = field(default_factory=PriorSpec)
    learning_rate: float = 1e-6
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0
    loss_variant: str = "deviation"
    focal_gamma: float = 2.0
    architecture_variant: str = "full"

    def __post_init__(self):
        if isinstance(self.prior, dict):
            self.prior = PriorSpec(**self.prior)
        if self.attention_width < 1:
            raise ConfigError(f"attention_width must be positive, got {self.attention_width}")
        if self.head_count < 1:
            raise ConfigError(f"head_count must be positive, got {self.head_count}")
        if not 0.0 < self.k_fraction <= 1.0:
            raise ConfigError(f"k_fraction must lie in (0, 1], got {self.k_fraction}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 2 or self.batch_size % 2 != 0:
            raise ConfigError(
                f"batch_size must be a positive even integer (balanced halves), "
                f"got {self.batch_size}"
            )
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ConfigError(f"unknown loss_variant {self.loss_variant!r}")
        if self.focal_gamma < 0:
            raise ConfigError(f"focal_gamma must be >= 0, got {self.focal_gamma}")
        if self.architecture_variant not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture_variant {self.architecture_variant!r}")

    def loss_config(self) -> LossConfig:
        return LossConfig(
            margin=self.margin, variant=self.loss_variant, focal_gamma=self.focal_gamma
        )

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        # sort_keys keeps serialized configs byte-stable across runs
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def load_config(path) -> RunConfig:
    """Read a JSON config file mirroring the RunConfig fields."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataFormatError(f"config file {path} must hold a JSON object")
    return RunConfig.from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
        fh.write("\n")
