"""Training loop: balanced few-shot batches, exact gradients, Adam updates.

Gradients are derived by hand, not by an autodiff framework. Per document
the chain runs loss -> standardized score (affine) -> top-K mean (1/K routed
to the selected instances, zero elsewhere) -> score matrix -> attention ->
column softmax -> the two projection matrices, plus the orthogonality
penalty's own path into the attention matrix. Kinks (inlier loss at zero,
outlier hinge at the margin, top-K ties) take subgradient zero.

The loop is single-threaded and fully deterministic: one seeded generator
drives initialization, batch sampling, and reference draws, and its state is
serialized into every checkpoint so an interrupted run resumes bit-exactly.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .checkpoint import AdamState, Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig
from .datasets import TrainingSet
from .errors import ConfigError, NumericError, ShapeMismatchError
from .losses import (
    ReferenceStats,
    ablation_loss,
    ablation_loss_grad,
    deviation_loss,
    deviation_loss_grad,
    sample_reference,
    z_deviation,
)
from .model import (
    AttentionParams,
    EmbeddingSequence,
    LabeledExample,
    column_softmax,
    orthogonality_loss,
    orthogonality_loss_grad,
    topk_count,
)

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class GradientBundle:
    """Gradients of the batch loss with respect to both projection matrices."""

    d_token_proj: np.ndarray
    d_head_proj: np.ndarray


@dataclass
class DocumentGradients:
    """Per-document loss pieces and gradients, kept for tests and diagnostics."""

    dev_loss: float
    orth_loss: float
    d_token_proj: np.ndarray
    d_head_proj: np.ndarray
    d_instances: np.ndarray
    selected: np.ndarray


def init_params(dim: int, cfg: RunConfig, rng: np.random.Generator) -> AttentionParams:
    """Uniform(-b, b) per matrix with b = sqrt(6 / (fan_in + fan_out))."""
    b1 = math.sqrt(6.0 / (dim + cfg.attention_width))
    b2 = math.sqrt(6.0 / (cfg.attention_width + cfg.head_count))
    token_proj = rng.uniform(-b1, b1, size=(dim, cfg.attention_width))
    head_proj = rng.uniform(-b2, b2, size=(cfg.attention_width, cfg.head_count))
    return AttentionParams(token_proj, head_proj)


def balanced_batch(
    inliers: list[EmbeddingSequence],
    outliers: list[EmbeddingSequence],
    batch_size: int,
    rng: np.random.Generator,
) -> list[LabeledExample]:
    """Half inliers, half outliers, in a deterministic shuffled order.

    Inliers are drawn without replacement (with replacement only when there
    are fewer inliers than half a batch); the few labeled outliers are
    always drawn with replacement, so the same outlier may repeat.
    """
    if not outliers:
        raise ConfigError(
            "training requires at least one labeled outlier document; "
            "provide a few-shot outlier set in the manifest"
        )
    if not inliers:
        raise ConfigError("training requires at least one inlier document")
    if batch_size < 2 or batch_size % 2 != 0:
        raise ConfigError(f"batch_size must be a positive even integer, got {batch_size}")
    half = batch_size // 2
    inl_idx = rng.choice(len(inliers), size=half, replace=len(inliers) < half)
    out_idx = rng.choice(len(outliers), size=half, replace=True)
    examples = [LabeledExample(inliers[i], 0) for i in inl_idx]
    examples += [LabeledExample(outliers[j], 1) for j in out_idx]
    order = rng.permutation(batch_size)
    return [examples[i] for i in order]


def document_gradients(
    example: LabeledExample,
    params: AttentionParams,
    ref: ReferenceStats | None,
    cfg: RunConfig,
) -> DocumentGradients:
    """Forward pass plus exact backward pass for a single document."""
    if cfg.architecture_variant == "no_mhsa":
        raise ConfigError("the attention-free baseline has no trainable parameters")
    seq = example.embedding
    if seq.dim != params.dim:
        raise ShapeMismatchError(
            f"document {seq.doc_id!r} has dim {seq.dim}, parameters expect {params.dim}"
        )
    h = seq.tokens
    label = example.label

    pre_tanh = h.T @ params.token_proj
    activ = np.tanh(pre_tanh)
    logits = activ @ params.head_proj
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite attention logits for document {seq.doc_id!r}")
    attention = column_softmax(logits)
    score_mat = h @ attention
    instances = score_mat.flatten(order="F")

    n_instances = instances.size
    if cfg.architecture_variant == "no_topk":
        k = n_instances
        selected = np.arange(n_instances)
    else:
        k = topk_count(n_instances, cfg.k_fraction)
        order = np.argsort(-instances, kind="stable")
        selected = np.sort(order[:k])
    doc_score = float(instances[selected].mean())

    if cfg.loss_variant == "deviation":
        if ref is None:
            raise ConfigError("the deviation loss requires reference statistics")
        z = z_deviation(doc_score, ref)
        dev = deviation_loss(z, label, cfg.margin)
        d_score = deviation_loss_grad(z, label, cfg.margin) / ref.std
    else:
        dev = ablation_loss(doc_score, label, cfg.loss_config())
        d_score = ablation_loss_grad(doc_score, label, cfg.loss_config())

    orth = orthogonality_loss(attention)

    # Backward: route 1/K of the score gradient to each selected instance.
    d_instances = np.zeros(n_instances)
    d_instances[selected] = d_score / k
    d_score_mat = d_instances.reshape(score_mat.shape, order="F")
    d_attention = h.T @ d_score_mat + orthogonality_loss_grad(attention)
    # Column softmax Jacobian: dZ = A * (G - sum(A * G)) per column.
    d_logits = attention * (d_attention - (attention * d_attention).sum(axis=0, keepdims=True))
    d_head_proj = activ.T @ d_logits
    d_activ = d_logits @ params.head_proj.T
    d_pre_tanh = d_activ * (1.0 - activ * activ)
    d_token_proj = h @ d_pre_tanh

    if not (np.all(np.isfinite(d_token_proj)) and np.all(np.isfinite(d_head_proj))):
        raise NumericError(
            f"non-finite gradient for document {seq.doc_id!r} in the attention backward pass"
        )
    return DocumentGradients(
        dev_loss=float(dev),
        orth_loss=float(orth),
        d_token_proj=d_token_proj,
        d_head_proj=d_head_proj,
        d_instances=d_instances,
        selected=selected,
    )


def batch_gradients(
    batch: list[LabeledExample],
    params: AttentionParams,
    ref: ReferenceStats | None,
    cfg: RunConfig,
) -> tuple[float, float, GradientBundle]:
    """Mean deviation loss, mean orthogonality loss, and mean gradients."""
    if not batch:
        raise ConfigError("cannot compute gradients for an empty batch")
    d_token = np.zeros_like(params.token_proj)
    d_head = np.zeros_like(params.head_proj)
    dev_total = 0.0
    orth_total = 0.0
    for example in batch:
        doc = document_gradients(example, params, ref, cfg)
        dev_total += doc.dev_loss
        orth_total += doc.orth_loss
        d_token += doc.d_token_proj
        d_head += doc.d_head_proj
    scale = 1.0 / len(batch)
    return (
        dev_total * scale,
        orth_total * scale,
        GradientBundle(d_token * scale, d_head * scale),
    )


def loss_and_gradients(
    batch: list[LabeledExample],
    params: AttentionParams,
    ref: ReferenceStats | None,
    cfg: RunConfig,
) -> tuple[float, GradientBundle]:
    """Total batch loss (deviation mean + orthogonality mean) and gradients."""
    dev, orth, grads = batch_gradients(batch, params, ref, cfg)
    return dev + orth, grads


def adam_step(
    params: AttentionParams,
    grads: GradientBundle,
    state: AdamState,
    lr: float,
) -> tuple[AttentionParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    t = state.step + 1
    corr1 = 1.0 - ADAM_BETA1**t
    corr2 = 1.0 - ADAM_BETA2**t

    def update(theta, grad, m, v):
        m_t = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v_t = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
        theta_t = theta - lr * (m_t / corr1) / (np.sqrt(v_t / corr2) + ADAM_EPS)
        return theta_t, m_t, v_t

    token, m_token, v_token = update(
        params.token_proj, grads.d_token_proj, state.m_token, state.v_token
    )
    head, m_head, v_head = update(params.head_proj, grads.d_head_proj, state.m_head, state.v_head)
    return (
        AttentionParams(token, head),
        AdamState(step=t, m_token=m_token, v_token=v_token, m_head=m_head, v_head=v_head),
    )


def batches_per_epoch(inlier_count: int, batch_size: int) -> int:
    """One epoch covers each inlier once in expectation."""
    return -(-inlier_count // (batch_size // 2))


def _configs_compatible(resumed: RunConfig, requested: RunConfig) -> bool:
    return replace(resumed, epochs=0).to_json() == replace(requested, epochs=0).to_json()


def train(
    data: TrainingSet,
    cfg: RunConfig,
    checkpoint_dir: str | None,
    resume_from: str | None = None,
) -> Checkpoint:
    """Run (or resume) a full training job and return the final checkpoint.

    A checkpoint is written after every epoch. The attention-free baseline
    has nothing to train, so it returns its initialization checkpoint
    immediately and scoring proceeds from that.
    """
    if not data.inliers:
        raise ConfigError("training set has no inlier documents")
    if not data.outliers:
        raise ConfigError(
            "training set has no labeled outliers; few-shot training requires at least one"
        )
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if resume_from is not None:
        previous = load_checkpoint(resume_from)
        if not _configs_compatible(previous.config, cfg):
            raise ConfigError(
                "resume config differs from the checkpoint's config in a field other than epochs"
            )
        params = previous.params
        adam = previous.adam
        rng.bit_generator.state = previous.rng_state
        start_epoch = previous.epoch + 1
        history = list(previous.loss_history)
    else:
        params = init_params(data.dim, cfg, rng)
        adam = AdamState.zeros(params)
        start_epoch = 1
        history = []

    def snapshot(epoch: int) -> Checkpoint:
        return Checkpoint(
            params=params,
            config=cfg,
            adam=adam,
            rng_state=rng.bit_generator.state,
            epoch=epoch,
            loss_history=list(history),
        )

    def persist(ckpt: Checkpoint) -> None:
        if checkpoint_dir:
            save_checkpoint(ckpt, os.path.join(checkpoint_dir, f"epoch-{ckpt.epoch:05d}.ckpt"))

    if cfg.architecture_variant == "no_mhsa":
        logger.info("attention-free baseline has no trainable parameters; skipping training")
        ckpt = snapshot(0)
        persist(ckpt)
        return ckpt

    if cfg.epochs == 0 or start_epoch > cfg.epochs:
        ckpt = snapshot(start_epoch - 1 if resume_from is not None else 0)
        persist(ckpt)
        return ckpt

    n_batches = batches_per_epoch(len(data.inliers), cfg.batch_size)
    ckpt = None
    for epoch in range(start_epoch, cfg.epochs + 1):
        epoch_losses = np.empty(n_batches)
        for b in range(n_batches):
            batch = balanced_batch(data.inliers, data.outliers, cfg.batch_size, rng)
            ref = sample_reference(cfg.prior, rng)
            dev, orth, grads = batch_gradients(batch, params, ref, cfg)
            params, adam = adam_step(params, grads, adam, cfg.learning_rate)
            total = dev + orth
            epoch_losses[b] = total
            logger.info(
                "epoch=%d batch=%d l1=%.8g l2=%.8g total=%.8g mu_r=%.8g sigma_r=%.8g",
                epoch, b + 1, dev, orth, total, ref.mean, ref.std,
            )
        history.append((epoch, float(epoch_losses.mean())))
        ckpt = snapshot(epoch)
        persist(ckpt)
    return ckpt
