"""Experiment harness: one axis varied, everything else held at a base config.

Supported axes: ``k_fraction``, ``outlier_count``, ``contamination_rate``,
``loss_variant``, ``architecture_variant``. Every (value, repeat) cell draws
its own deterministic seed from the master seed, trains from scratch, and is
evaluated on the fixed test split, so serial and parallel execution would
produce identical reports.

Contamination relabels true outliers as normal inside the *training* inlier
pool only; test labels are never touched. The labeled few-shot outlier set
and the injected contaminants are disjoint draws from the training outlier
pool, and a cell whose demands exceed the pool is marked skipped rather
than silently shrunk.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .datasets import TrainingSet
from .errors import ConfigError
from .metrics import auprc, auroc, score_dataset
from .model import LabeledExample
from .trainer import train

SWEEP_AXES = (
    "k_fraction",
    "outlier_count",
    "contamination_rate",
    "loss_variant",
    "architecture_variant",
)


@dataclass
class SweepSpec:
    axis: str
    values: list
    base: RunConfig
    repeats: int = 5
    labeled_outlier_count: int = 10

    def __post_init__(self):
        if isinstance(self.base, dict):
            self.base = RunConfig.from_dict(self.base)
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.labeled_outlier_count < 1:
            raise ConfigError("labeled_outlier_count must be >= 1")


@dataclass
class SweepData:
    """Training pool plus a fixed labeled test split."""

    train: TrainingSet
    test: list[LabeledExample]


@dataclass
class CellResult:
    axis: str
    value: object
    repeat: int
    seed: int
    auroc: float | None
    auprc: float | None
    train_seconds: float | None
    skipped: str | None = None


@dataclass
class SweepReport:
    spec_axis: str
    records: list[CellResult] = field(default_factory=list)

    def summary(self) -> list[dict]:
        """Mean and std per axis value over the non-skipped repeats."""
        out = []
        seen = []
        for record in self.records:
            if record.value not in seen:
                seen.append(record.value)
        for value in seen:
            cells = [r for r in self.records if r.value == value and r.skipped is None]
            skipped = [r for r in self.records if r.value == value and r.skipped is not None]
            row = {"axis": self.spec_axis, "value": value, "repeats": len(cells)}
            if cells:
                rocs = np.array([r.auroc for r in cells])
                prcs = np.array([r.auprc for r in cells])
                row.update(
                    mean_auroc=float(rocs.mean()),
                    std_auroc=float(rocs.std(ddof=0)),
                    mean_auprc=float(prcs.mean()),
                    std_auprc=float(prcs.std(ddof=0)),
                )
            if skipped:
                row["skipped"] = skipped[0].skipped
            out.append(row)
        return out

    def to_json_doc(self) -> dict:
        return {
            "axis": self.spec_axis,
            "records": [
                {
                    "axis": r.axis,
                    "value": r.value,
                    "repeat": r.repeat,
                    "seed": r.seed,
                    "auroc": r.auroc,
                    "auprc": r.auprc,
                    "train_seconds": r.train_seconds,
                    "skipped": r.skipped,
                }
                for r in self.records
            ],
            "summary": self.summary(),
        }

    def to_tsv(self) -> str:
        lines = ["axis\tvalue\trepeat\tseed\tauroc\tauprc\ttrain_seconds\tskipped"]
        for r in self.records:
            lines.append(
                "\t".join(
                    [
                        r.axis,
                        str(r.value),
                        str(r.repeat),
                        str(r.seed),
                        "" if r.auroc is None else repr(r.auroc),
                        "" if r.auprc is None else repr(r.auprc),
                        "" if r.train_seconds is None else f"{r.train_seconds:.3f}",
                        r.skipped or "",
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def to_series_csv(self) -> str:
        """Plot-ready per-value series: value, mean and std of both metrics."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["value", "mean_auroc", "std_auroc", "mean_auprc", "std_auprc"])
        for row in self.summary():
            if "mean_auroc" not in row:
                continue
            writer.writerow(
                [
                    row["value"],
                    repr(row["mean_auroc"]),
                    repr(row["std_auroc"]),
                    repr(row["mean_auprc"]),
                    repr(row["std_auprc"]),
                ]
            )
        return buf.getvalue()


def cell_seed(master_seed: int, value_index: int, repeat: int) -> int:
    """Deterministic per-cell seed; independent of execution order."""
    seq = np.random.SeedSequence([master_seed, value_index, repeat])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _contamination_injection_count(rate: float, inlier_count: int) -> int:
    # n injected so that injected / (inliers + injected) ~= rate
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"contamination rate must lie in [0, 1), got {rate}")
    return int(round(rate / (1.0 - rate) * inlier_count))


def _assemble_cell(
    spec: SweepSpec, data: SweepData, value, rng: np.random.Generator
) -> tuple[TrainingSet, RunConfig]:
    """Build the per-cell training set and config; raises ConfigError if infeasible."""
    cfg = spec.base
    pool = data.train.outliers
    labeled_count = spec.labeled_outlier_count

    if spec.axis == "k_fraction":
        cfg = cfg.with_overrides(k_fraction=float(value))
    elif spec.axis == "loss_variant":
        cfg = cfg.with_overrides(loss_variant=str(value))
    elif spec.axis == "architecture_variant":
        cfg = cfg.with_overrides(architecture_variant=str(value))
    elif spec.axis == "outlier_count":
        labeled_count = int(value)
        if labeled_count < 1:
            raise ConfigError(f"outlier_count value must be >= 1, got {value}")

    if len(pool) < labeled_count:
        raise ConfigError(
            f"outlier pool has {len(pool)} documents, cell needs {labeled_count} labeled"
        )
    chosen = rng.choice(len(pool), size=labeled_count, replace=False)
    labeled = [pool[i] for i in chosen]
    inliers = list(data.train.inliers)

    if spec.axis == "contamination_rate":
        rate = float(value)
        n_inject = _contamination_injection_count(rate, len(inliers))
        taken = {int(i) for i in chosen}
        remaining = [pool[i] for i in range(len(pool)) if i not in taken]
        if len(remaining) < n_inject:
            raise ConfigError(
                f"contamination {rate:.0%} needs {n_inject} extra outliers, "
                f"pool only has {len(remaining)} left"
            )
        if n_inject:
            picked = rng.choice(len(remaining), size=n_inject, replace=False)
            inliers.extend(remaining[i] for i in picked)

    return TrainingSet(inliers=inliers, outliers=labeled), cfg


def run_sweep(spec: SweepSpec, data: SweepData, checkpoint_root: str | None = None) -> SweepReport:
    """Train and evaluate every (value, repeat) cell of the sweep."""
    report = SweepReport(spec_axis=spec.axis)
    for value_index, value in enumerate(spec.values):
        for repeat in range(spec.repeats):
            seed = cell_seed(spec.base.seed, value_index, repeat)
            sampling_rng = np.random.Generator(np.random.PCG64(seed))
            try:
                cell_train, cfg = _assemble_cell(spec, data, value, sampling_rng)
            except ConfigError as exc:
                report.records.append(
                    CellResult(
                        axis=spec.axis, value=value, repeat=repeat, seed=seed,
                        auroc=None, auprc=None, train_seconds=None, skipped=str(exc),
                    )
                )
                continue
            cfg = cfg.with_overrides(seed=seed)
            cell_dir = None
            if checkpoint_root:
                cell_dir = f"{checkpoint_root}/{spec.axis}-{value_index}-r{repeat}"
            started = time.perf_counter()
            ckpt = train(cell_train, cfg, cell_dir)
            elapsed = time.perf_counter() - started
            scored = score_dataset(data.test, ckpt.params, cfg)
            report.records.append(
                CellResult(
                    axis=spec.axis,
                    value=value,
                    repeat=repeat,
                    seed=seed,
                    auroc=auroc(scored),
                    auprc=auprc(scored),
                    train_seconds=elapsed,
                )
            )
    return report
