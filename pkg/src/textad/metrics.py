"""Rank metrics computed exactly, plus whole-dataset scoring.

AUROC uses the Mann-Whitney statistic with midrank tie correction, i.e.
P(score_pos > score_neg) + 0.5 * P(tie), computed by one sort. AUPRC is
step-wise average precision with equal scores processed as one block (no
trapezoidal interpolation). Both agree with brute-force pair counting /
threshold enumeration to float precision; the test suite holds those
oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import MetricUndefinedError, ShapeMismatchError
from .model import AttentionParams, LabeledExample, document_score


@dataclass
class ScoredSet:
    """Scored test documents: (doc_id, anomaly score, true label) triples."""

    entries: list[tuple[str, float, int]]

    def __post_init__(self):
        for doc_id, score, label in self.entries:
            if label not in (0, 1):
                raise MetricUndefinedError(f"label of {doc_id!r} must be 0 or 1, got {label!r}")
            if not np.isfinite(score):
                raise MetricUndefinedError(f"score of {doc_id!r} is not finite")

    def scores(self) -> np.ndarray:
        return np.array([score for _, score, _ in self.entries], dtype=np.float64)

    def labels(self) -> np.ndarray:
        return np.array([label for _, _, label in self.entries], dtype=np.int64)

    def ranked(self) -> list[tuple[str, float, int]]:
        """Entries ordered most-anomalous first; the top of this list is
        what gets flagged as outliers."""
        return sorted(self.entries, key=lambda e: (-e[1], e[0]))


def _midranks(scores: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied scores sharing the mean of their rank range."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # ranks i+1 .. j+1 (1-based) share their midpoint
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scored: ScoredSet) -> float:
    """Probability a random positive outranks a random negative, ties at half."""
    labels = scored.labels()
    scores = scored.scores()
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"AUROC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )
    ranks = _midranks(scores)
    u_stat = ranks[labels == 1].sum() - 0.5 * n_pos * (n_pos + 1)
    return float(u_stat / (n_pos * n_neg))


def auprc(scored: ScoredSet) -> float:
    """Step-wise average precision, descending scores, tie blocks merged."""
    labels = scored.labels()
    scores = scored.scores()
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise MetricUndefinedError("AUPRC needs at least one positive example")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < sorted_scores.size:
        j = i
        while j + 1 < sorted_scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        block_tp = int(sorted_labels[i : j + 1].sum())
        tp += block_tp
        seen = j + 1
        if block_tp:
            ap += (tp / seen) * (block_tp / n_pos)
        i = j + 1
    return float(ap)


def score_dataset(
    examples: list[LabeledExample],
    params: AttentionParams | None,
    cfg: RunConfig,
) -> ScoredSet:
    """Score every document with the configured architecture variant.

    Scoring is a pure map over documents: the output scores do not depend
    on dataset order.
    """
    if params is not None and examples:
        dim = examples[0].embedding.dim
        if cfg.architecture_variant != "no_mhsa" and params.dim != dim:
            raise ShapeMismatchError(
                f"dataset dim {dim} does not match checkpoint dim {params.dim}"
            )
    entries = []
    for example in examples:
        result = document_score(
            example.embedding, params, cfg.k_fraction, cfg.architecture_variant
        )
        entries.append((example.embedding.doc_id, result.score, example.label))
    return ScoredSet(entries=entries)


def metric_report(scored: ScoredSet) -> dict:
    """Both metrics plus the class counts, ready for JSON serialization."""
    labels = scored.labels()
    return {
        "count": int(labels.size),
        "positives": int(labels.sum()),
        "negatives": int(labels.size - labels.sum()),
        "auroc": auroc(scored),
        "auprc": auprc(scored),
    }
