"""Prior-anchored deviation loss and its classification-loss stand-ins.

The reference distribution for "normal" anomaly scores is a Gaussian;
each training batch draws a fresh sample of reference scores, and document
scores are standardized against that sample's mean and (Bessel-corrected)
standard deviation. Inliers are pulled toward a standardized score of zero,
outliers are hinged above a margin in the upper tail.

``bce`` and ``focal`` are drop-in replacements used for ablations: they
squash the raw document score through a logistic function and skip the
reference sample entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegeneratePriorError

LOSS_VARIANTS = ("deviation", "bce", "focal")

_LOG_CLAMP = 1e-12
_TINY = 1e-300  # keeps 0**negative out of the focal power terms


@dataclass
class PriorSpec:
    """Gaussian prior for reference scores plus how many draws to take."""

    mean: float = 0.0
    std: float = 1.0
    sample_count: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.std <= 0:
            raise ConfigError(f"prior std must be positive, got {self.std}")
        if self.sample_count < 2:
            raise ConfigError(
                f"prior sample_count must be at least 2, got {self.sample_count}"
            )
        if self.seed < 0:
            raise ConfigError(f"prior seed must be non-negative, got {self.seed}")


@dataclass
class ReferenceStats:
    """Mean and spread of one batch's reference-score draws."""

    mean: float
    std: float
    draw_count: int

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise DegeneratePriorError("reference statistics are non-finite")
        if self.std <= 0:
            raise DegeneratePriorError(
                f"reference std must be positive, got {self.std}; "
                "z-scores are undefined for a degenerate prior"
            )


@dataclass
class LossConfig:
    """Which loss drives training and its scalar knobs."""

    margin: float = 5.0
    variant: str = "deviation"
    focal_gamma: float = 2.0

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.variant not in LOSS_VARIANTS:
            raise ConfigError(f"unknown loss variant {self.variant!r}")
        if self.focal_gamma < 0:
            raise ConfigError(f"focal_gamma must be >= 0, got {self.focal_gamma}")


def sample_reference(prior: PriorSpec, rng=None) -> ReferenceStats:
    """Draw ``sample_count`` i.i.d. reference scores and summarize them.

    ``rng`` only needs a ``normal(loc, scale, size)`` method; pass the
    training generator for a reproducible stream, or leave it ``None`` to
    seed a standalone generator from ``prior.seed``. Draws are refreshed by
    the caller every batch.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(prior.seed))
    draws = np.asarray(rng.normal(prior.mean, prior.std, prior.sample_count), dtype=np.float64)
    if draws.shape != (prior.sample_count,):
        raise ConfigError(
            f"reference generator returned shape {draws.shape}, "
            f"expected ({prior.sample_count},)"
        )
    mean = float(draws.mean())
    std = float(draws.std(ddof=1))
    if std == 0.0:
        raise DegeneratePriorError("reference draws have zero spread")
    return ReferenceStats(mean=mean, std=std, draw_count=prior.sample_count)


def z_deviation(score: float, ref: ReferenceStats) -> float:
    """Standardize a document score against the reference sample."""
    return (score - ref.mean) / ref.std


def deviation_loss(z: float, label: int, margin: float) -> float:
    """Pull inlier z-scores to zero, hinge outliers above the margin."""
    if label == 0:
        return abs(z)
    return max(0.0, margin - z)


def deviation_loss_grad(z: float, label: int, margin: float) -> float:
    """d(deviation_loss)/dz with the subgradient fixed to 0 at the kinks."""
    if label == 0:
        if z > 0.0:
            return 1.0
        if z < 0.0:
            return -1.0
        return 0.0
    return -1.0 if z < margin else 0.0


def total_loss(dev: float, orth: float) -> float:
    """Deviation term plus orthogonality term, both at unit weight."""
    return dev + orth


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _clamped_log(x: float) -> float:
    return math.log(max(x, _LOG_CLAMP))


def ablation_loss(score: float, label: int, cfg: LossConfig) -> float:
    """Cross-entropy (plain or focal) on the logistic-squashed document score.

    Log arguments are clamped at 1e-12; with ``focal_gamma == 0`` the focal
    form reduces exactly to plain cross-entropy.
    """
    if cfg.variant not in ("bce", "focal"):
        raise ConfigError(f"ablation_loss is undefined for variant {cfg.variant!r}")
    p = _sigmoid(score)
    if cfg.variant == "bce":
        return -(label * _clamped_log(p) + (1 - label) * _clamped_log(1.0 - p))
    g = cfg.focal_gamma
    return -(
        label * (1.0 - p) ** g * _clamped_log(p)
        + (1 - label) * p**g * _clamped_log(1.0 - p)
    )


def ablation_loss_grad(score: float, label: int, cfg: LossConfig) -> float:
    """d(ablation_loss)/d(score), exact for the clamped formulas above."""
    if cfg.variant not in ("bce", "focal"):
        raise ConfigError(f"ablation_loss is undefined for variant {cfg.variant!r}")
    p = _sigmoid(score)
    dp = p * (1.0 - p)
    # Inside a clamped region the log is constant, so its derivative is 0.
    inv_p = 1.0 / p if p > _LOG_CLAMP else 0.0
    inv_q = 1.0 / (1.0 - p) if (1.0 - p) > _LOG_CLAMP else 0.0
    if cfg.variant == "bce":
        dl_dp = -label * inv_p + (1 - label) * inv_q
        return dl_dp * dp
    g = cfg.focal_gamma
    pc = max(p, _TINY)
    qc = max(1.0 - p, _TINY)
    if label == 1:
        dl_dp = (g * qc ** (g - 1.0) * _clamped_log(p) if g > 0.0 else 0.0) - qc**g * inv_p
    else:
        dl_dp = (-g * pc ** (g - 1.0) * _clamped_log(1.0 - p) if g > 0.0 else 0.0) + pc**g * inv_q
    return dl_dp * dp
