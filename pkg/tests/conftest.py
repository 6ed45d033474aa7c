import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240817))


def random_instance(rng, d_max=8, n_max=6, width_max=4, heads_max=3):
    """A small random document + parameters for gradient-scale tests."""
    from textad.model import AttentionParams, EmbeddingSequence

    d = int(rng.integers(1, d_max + 1))
    n = int(rng.integers(1, n_max + 1))
    width = int(rng.integers(1, width_max + 1))
    heads = int(rng.integers(1, heads_max + 1))
    seq = EmbeddingSequence(rng.normal(size=(d, n)), doc_id=f"doc-{d}x{n}")
    params = AttentionParams(
        rng.normal(scale=0.7, size=(d, width)), rng.normal(scale=0.7, size=(width, heads))
    )
    return seq, params
