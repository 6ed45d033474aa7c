"""Finite-difference verification of the hand-derived backward pass.

The oracle recomputes the whole objective in 80-bit extended precision
(numpy longdouble) and differentiates it centrally at step 1e-5. At that
step a float64 oracle's own roundoff (~eps * |loss| / step) would swamp
gradient entries below ~1e-7, so the extra precision is what makes the
1e-4 relative tolerance meaningful down to the 1e-8 absolute floor.
"""

import math

import numpy as np
import pytest

from textad.config import RunConfig
from textad.losses import ReferenceStats
from textad.model import (
    AttentionParams,
    EmbeddingSequence,
    LabeledExample,
    document_score,
)
from textad.trainer import batch_gradients, document_gradients, loss_and_gradients

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8

LD = np.longdouble
_LOG_CLAMP = LD("1e-12")


def tiny_config(**overrides) -> RunConfig:
    base = dict(
        attention_width=3,
        head_count=2,
        k_fraction=0.35,
        margin=5.0,
        learning_rate=1e-3,
        batch_size=2,
        epochs=1,
        seed=0,
    )
    base.update(overrides)
    return RunConfig(**base)


def oracle_total_loss(tokens, label, token_proj, head_proj, ref, cfg):
    """Forward-only objective in extended precision; independent of trainer code."""
    h = tokens.astype(LD)
    logits = np.tanh(h.T @ token_proj) @ head_proj
    shifted = logits - logits.max(axis=0, keepdims=True)
    exps = np.exp(shifted)
    attention = exps / exps.sum(axis=0, keepdims=True)
    score_mat = h @ attention
    instances = score_mat.flatten(order="F")
    if cfg.architecture_variant == "no_topk":
        doc_score = instances.sum() / LD(instances.size)
    else:
        k = max(1, math.floor(cfg.k_fraction * instances.size))
        doc_score = np.sort(instances)[::-1][:k].sum() / LD(k)
    if cfg.loss_variant == "deviation":
        z = (doc_score - LD(ref.mean)) / LD(ref.std)
        if label == 0:
            dev = abs(z)
        else:
            dev = max(LD(0.0), LD(cfg.margin) - z)
    else:
        p = LD(1.0) / (LD(1.0) + np.exp(-doc_score))
        log_p = np.log(max(p, _LOG_CLAMP))
        log_q = np.log(max(LD(1.0) - p, _LOG_CLAMP))
        if cfg.loss_variant == "bce":
            dev = -(label * log_p + (1 - label) * log_q)
        else:
            g = LD(cfg.focal_gamma)
            dev = -(label * (LD(1.0) - p) ** g * log_p + (1 - label) * p**g * log_q)
    gram_gap = attention.T @ attention - np.eye(attention.shape[1], dtype=LD)
    return dev + (gram_gap * gram_gap).sum()


def fd_gradients(example, params, ref, cfg):
    """Central differences of the extended-precision oracle, per entry."""
    tokens = example.embedding.tokens
    label = example.label
    mats = [params.token_proj.astype(LD), params.head_proj.astype(LD)]
    step = LD(FD_STEP)
    grads = []
    for which, matrix in enumerate(mats):
        grad = np.zeros(matrix.shape, dtype=np.float64)
        for idx in np.ndindex(*matrix.shape):
            saved = matrix[idx]
            matrix[idx] = saved + step
            up = oracle_total_loss(tokens, label, mats[0], mats[1], ref, cfg)
            matrix[idx] = saved - step
            down = oracle_total_loss(tokens, label, mats[0], mats[1], ref, cfg)
            matrix[idx] = saved
            grad[idx] = float((up - down) / (2 * step))
        grads.append(grad)
    return grads


def max_relative_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    """Worst per-entry error: relative above the floor, absolute below it."""
    worst = 0.0
    for a, f in zip(analytic.ravel(), fd.ravel()):
        if abs(f) < ABS_FLOOR:
            worst = max(worst, abs(a - f))
        else:
            worst = max(worst, abs(a - f) / abs(f))
    return worst


def away_from_kinks(example, params, ref, cfg, gap=1e-3) -> bool:
    """Reject fixtures near the loss kinks or a top-K tie boundary."""
    result = document_score(
        example.embedding, params, cfg.k_fraction, cfg.architecture_variant
    )
    if cfg.loss_variant == "deviation":
        z = (result.score - ref.mean) / ref.std
        if example.label == 0 and abs(z) < gap:
            return False
        if example.label == 1 and abs(z - cfg.margin) < gap:
            return False
    if cfg.architecture_variant != "no_topk":
        ordered = np.sort(result.instances)[::-1]
        k = result.selected.size
        if k < ordered.size and ordered[k - 1] - ordered[k] < gap:
            return False
    return True


def random_example(rng, dim=None):
    d = dim or int(rng.integers(1, 9))
    n = int(rng.integers(1, 7))
    seq = EmbeddingSequence(rng.normal(size=(d, n)) * 2.0, doc_id=f"fd-{d}x{n}")
    return LabeledExample(seq, int(rng.integers(0, 2)))


def random_params(rng, dim, width=None, heads=None):
    width = width or int(rng.integers(1, 5))
    heads = heads or int(rng.integers(1, 4))
    return AttentionParams(
        rng.normal(scale=0.8, size=(dim, width)), rng.normal(scale=0.8, size=(width, heads))
    )


@pytest.mark.parametrize("variant", ["deviation", "bce", "focal"])
@pytest.mark.parametrize("architecture", ["full", "no_topk"])
def test_document_gradients_match_finite_differences(variant, architecture):
    rng = np.random.Generator(np.random.PCG64(1234))
    ref = ReferenceStats(mean=0.05, std=0.9, draw_count=100)
    checked = 0
    while checked < 12:
        example = random_example(rng)
        cfg = tiny_config(
            loss_variant=variant,
            architecture_variant=architecture,
            attention_width=int(rng.integers(1, 5)),
            head_count=int(rng.integers(1, 4)),
            k_fraction=float(rng.uniform(0.15, 1.0)),
        )
        params = random_params(rng, example.embedding.dim, cfg.attention_width, cfg.head_count)
        if not away_from_kinks(example, params, ref, cfg):
            continue
        doc = document_gradients(example, params, ref, cfg)
        fd_token, fd_head = fd_gradients(example, params, ref, cfg)
        assert max_relative_error(doc.d_token_proj, fd_token) < REL_TOL
        assert max_relative_error(doc.d_head_proj, fd_head) < REL_TOL
        checked += 1


def test_batch_gradients_match_finite_differences():
    rng = np.random.Generator(np.random.PCG64(99))
    ref = ReferenceStats(mean=-0.1, std=1.1, draw_count=100)
    cfg = tiny_config(k_fraction=0.4)
    dim = 5
    params = random_params(rng, dim, cfg.attention_width, cfg.head_count)
    batch = None
    while batch is None:
        candidate = [random_example(rng, dim=dim) for _ in range(4)]
        if all(away_from_kinks(ex, params, ref, cfg) for ex in candidate):
            batch = candidate
    loss, grads = loss_and_gradients(batch, params, ref, cfg)

    fd_pairs = [fd_gradients(ex, params, ref, cfg) for ex in batch]
    fd_token = np.mean([pair[0] for pair in fd_pairs], axis=0)
    fd_head = np.mean([pair[1] for pair in fd_pairs], axis=0)
    oracle_loss = np.mean(
        [
            float(
                oracle_total_loss(
                    ex.embedding.tokens,
                    ex.label,
                    params.token_proj.astype(LD),
                    params.head_proj.astype(LD),
                    ref,
                    cfg,
                )
            )
            for ex in batch
        ]
    )
    assert loss == pytest.approx(oracle_loss, abs=1e-10)
    assert max_relative_error(grads.d_token_proj, fd_token) < REL_TOL
    assert max_relative_error(grads.d_head_proj, fd_head) < REL_TOL


def test_topk_gradient_sparsity_is_exactly_k():
    rng = np.random.Generator(np.random.PCG64(5))
    ref = ReferenceStats(mean=0.0, std=1.0, draw_count=100)
    hits = 0
    while hits < 20:
        example = random_example(rng)
        cfg = tiny_config(k_fraction=float(rng.uniform(0.1, 0.9)))
        params = random_params(rng, example.embedding.dim, cfg.attention_width, cfg.head_count)
        if not away_from_kinks(example, params, ref, cfg):
            continue
        doc = document_gradients(example, params, ref, cfg)
        if example.label == 1:
            score = document_score(example.embedding, params, cfg.k_fraction).score
            if (score - ref.mean) / ref.std >= cfg.margin:
                continue  # saturated hinge: no incoming gradient at all
        nonzero = np.count_nonzero(doc.d_instances)
        assert nonzero == doc.selected.size
        hits += 1


def test_saturated_objective_has_zero_gradients():
    # One head, one token: the attention matrix is exactly [[1.0]], so the
    # orthogonality term is 0; a huge embedding saturates the outlier hinge.
    seq = EmbeddingSequence(np.full((2, 1), 50.0), doc_id="saturated")
    params = AttentionParams(np.ones((2, 3)), np.ones((3, 1)))
    ref = ReferenceStats(mean=0.0, std=1.0, draw_count=100)
    cfg = tiny_config(attention_width=3, head_count=1, k_fraction=1.0)
    example = LabeledExample(seq, 1)
    doc = document_gradients(example, params, ref, cfg)
    assert doc.dev_loss == 0.0
    assert doc.orth_loss == 0.0
    assert np.array_equal(doc.d_token_proj, np.zeros((2, 3)))
    assert np.array_equal(doc.d_head_proj, np.zeros((3, 1)))


def test_duplicated_batch_leaves_loss_and_gradients_unchanged():
    rng = np.random.Generator(np.random.PCG64(7))
    ref = ReferenceStats(mean=0.0, std=1.0, draw_count=100)
    cfg = tiny_config()
    dim = 4
    params = random_params(rng, dim, cfg.attention_width, cfg.head_count)
    batch = [random_example(rng, dim=dim) for _ in range(3)]
    loss_once, grads_once = loss_and_gradients(batch, params, ref, cfg)
    loss_twice, grads_twice = loss_and_gradients(batch + batch, params, ref, cfg)
    assert loss_twice == pytest.approx(loss_once, abs=1e-12)
    assert np.allclose(grads_twice.d_token_proj, grads_once.d_token_proj, atol=1e-12)
    assert np.allclose(grads_twice.d_head_proj, grads_once.d_head_proj, atol=1e-12)


def test_batch_gradients_reject_attention_free_variant():
    from textad.errors import ConfigError

    rng = np.random.Generator(np.random.PCG64(3))
    example = random_example(rng, dim=3)
    params = random_params(rng, 3)
    ref = ReferenceStats(mean=0.0, std=1.0, draw_count=100)
    with pytest.raises(ConfigError):
        batch_gradients([example], params, ref, tiny_config(architecture_variant="no_mhsa"))
