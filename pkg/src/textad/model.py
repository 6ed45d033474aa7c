"""Deterministic forward path from token embeddings to a scalar anomaly score.

A document is a ``(dim, n_tokens)`` matrix of contextual token embeddings.
Two learned matrices turn it into ``head_count`` attention columns (softmax
over token positions, applied per column), each attention column mixes the
tokens into one score vector, and the flattened score matrix is treated as a
bag of ``dim * head_count`` anomaly-score instances. The document score is
the mean of the top-K instances.

All math is float64 and purely functional; nothing here mutates its inputs,
so these functions are safe to call concurrently on shared parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeMismatchError

Array = np.ndarray

ARCHITECTURES = ("full", "no_topk", "no_mhsa")


def _as_float_matrix(value, name: str) -> Array:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass
class EmbeddingSequence:
    """Token embeddings for one document, shape ``(dim, n_tokens)``."""

    tokens: Array
    doc_id: str = ""

    def __post_init__(self):
        self.tokens = _as_float_matrix(self.tokens, f"embedding matrix of {self.doc_id!r}")
        if self.dim < 1 or self.n_tokens < 1:
            raise ShapeMismatchError(
                f"embedding matrix of {self.doc_id!r} must be at least 1x1, "
                f"got shape {self.tokens.shape}"
            )

    @property
    def dim(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[1]


@dataclass
class AttentionParams:
    """The entire trainable state: two projection matrices.

    ``token_proj`` maps token embeddings into the attention space
    (``dim x width``); ``head_proj`` maps attention activations to per-head
    logits (``width x heads``).
    """

    token_proj: Array
    head_proj: Array

    def __post_init__(self):
        self.token_proj = _as_float_matrix(self.token_proj, "token_proj")
        self.head_proj = _as_float_matrix(self.head_proj, "head_proj")
        if self.token_proj.shape[1] != self.head_proj.shape[0]:
            raise ShapeMismatchError(
                f"token_proj {self.token_proj.shape} and head_proj "
                f"{self.head_proj.shape} disagree on the attention width"
            )

    @property
    def dim(self) -> int:
        return self.token_proj.shape[0]

    @property
    def width(self) -> int:
        return self.token_proj.shape[1]

    @property
    def heads(self) -> int:
        return self.head_proj.shape[1]

    def copy(self) -> "AttentionParams":
        return AttentionParams(self.token_proj.copy(), self.head_proj.copy())


@dataclass
class LabeledExample:
    """A document paired with its label: 0 = inlier, 1 = outlier."""

    embedding: EmbeddingSequence
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ConfigError(f"label must be 0 or 1, got {self.label!r}")


def column_softmax(logits: Array) -> Array:
    """Softmax over rows, independently per column, with max-subtraction."""
    shifted = logits - logits.max(axis=0, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=0, keepdims=True)


def attention_forward(seq: EmbeddingSequence, params: AttentionParams) -> Array:
    """Compute the ``(n_tokens, heads)`` attention matrix for one document.

    Each column is a softmax over the token positions, so columns are
    strictly positive and sum to one.
    """
    if seq.dim != params.dim:
        raise ShapeMismatchError(
            f"embedding matrix {seq.tokens.shape} of {seq.doc_id!r} does not match "
            f"token_proj {params.token_proj.shape}"
        )
    logits = np.tanh(seq.tokens.T @ params.token_proj) @ params.head_proj
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite attention logits for document {seq.doc_id!r}")
    return column_softmax(logits)


def score_matrix(seq: EmbeddingSequence, attention: Array) -> Array:
    """Mix tokens through the attention columns and flatten to instance scores.

    Returns the column-major flattening of ``tokens @ attention`` (shape
    ``dim x heads``): entry ``j * dim + i`` holds score component ``i`` of
    head ``j``. Each head's score vector is a convex combination of the
    token embedding columns.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim != 2 or attention.shape[0] != seq.n_tokens:
        raise ShapeMismatchError(
            f"attention matrix {attention.shape} does not match the "
            f"{seq.n_tokens} tokens of {seq.doc_id!r}"
        )
    scores = seq.tokens @ attention
    if not np.all(np.isfinite(scores)):
        raise NumericError(f"non-finite score matrix for document {seq.doc_id!r}")
    return scores.flatten(order="F")


def topk_count(n_scores: int, k_fraction: float) -> int:
    """K = max(1, floor(k_fraction * n)), so a selection is never empty."""
    if not 0.0 < k_fraction <= 1.0:
        raise ConfigError(f"k_fraction must lie in (0, 1], got {k_fraction}")
    return max(1, int(math.floor(k_fraction * n_scores)))


def topk_score(scores: Array, k_fraction: float) -> tuple[float, Array]:
    """Mean of the K largest instance scores plus their (sorted) indices.

    Ties at the K-th value are broken toward the lowest index, which keeps
    the selection deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ShapeMismatchError(f"expected a non-empty score vector, got shape {scores.shape}")
    k = topk_count(scores.size, k_fraction)
    # Stable sort on the negated scores keeps equal scores in index order.
    order = np.argsort(-scores, kind="stable")
    selected = np.sort(order[:k])
    return float(scores[selected].mean()), selected


def orthogonality_loss(attention: Array) -> float:
    """Squared Frobenius distance of the head Gram matrix from the identity.

    Zero exactly when the attention columns are orthonormal; pushes heads to
    weight disjoint token sets.
    """
    attention = np.asarray(attention, dtype=np.float64)
    gram_gap = attention.T @ attention - np.eye(attention.shape[1])
    return float(np.sum(gram_gap * gram_gap))


def orthogonality_loss_grad(attention: Array) -> Array:
    """Gradient of :func:`orthogonality_loss` with respect to the attention matrix."""
    attention = np.asarray(attention, dtype=np.float64)
    gram_gap = attention.T @ attention - np.eye(attention.shape[1])
    return 4.0 * attention @ gram_gap


@dataclass
class DocumentScore:
    """Scalar document score plus the intermediates that produced it.

    ``attention`` is ``None`` for the attention-free baseline, where the raw
    embedding matrix is flattened straight into instance scores.
    """

    score: float
    instances: Array
    selected: Array
    attention: Array | None = None

    @property
    def k(self) -> int:
        return int(self.selected.size)


def variant_instances(
    seq: EmbeddingSequence,
    params: AttentionParams | None,
    architecture: str = "full",
) -> tuple[Array, Array | None]:
    """Instance-score vector (and attention matrix, when one exists) per variant."""
    if architecture not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture variant {architecture!r}")
    if architecture == "no_mhsa":
        # Score-only baseline: the embedding matrix itself is the bag of instances.
        return seq.tokens.flatten(order="F"), None
    if params is None:
        raise ConfigError(f"architecture {architecture!r} requires attention parameters")
    attention = attention_forward(seq, params)
    return score_matrix(seq, attention), attention


def document_score(
    seq: EmbeddingSequence,
    params: AttentionParams | None,
    k_fraction: float,
    architecture: str = "full",
) -> DocumentScore:
    """Chain attention, score mixing, and top-K selection for one document.

    ``no_topk`` averages every instance instead of the top K; ``no_mhsa``
    skips the attention layer entirely and feeds the flattened embedding
    matrix to the top-K selector.
    """
    instances, attention = variant_instances(seq, params, architecture)
    effective_k = 1.0 if architecture == "no_topk" else k_fraction
    score, selected = topk_score(instances, effective_k)
    return DocumentScore(score=score, instances=instances, selected=selected, attention=attention)
