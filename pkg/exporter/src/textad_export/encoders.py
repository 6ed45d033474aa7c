"""Token-level encoders.

Two families are supported through one interface (``encode(tokens or text)
-> (dim, n_tokens) float64``):

* ``hashed-attn-<dim>``: a self-contained deterministic encoder. Each token
  maps to a seeded Gaussian vector (hash of the token string), and one
  fixed, seeded self-attention layer mixes the sequence so a token's vector
  depends on its context. No downloads, byte-stable across runs; intended
  for tests, smoke corpora, and offline pipelines.

* any other name: treated as a transformers model directory or hub id.
  Token embeddings are the last encoder layer's hidden states (before any
  pooling), computed with the model frozen in eval mode. Requires the
  ``transformers`` and ``torch`` extras and a locally available model.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np


class EncoderUnavailableError(RuntimeError):
    """The requested encoder cannot be loaded in this environment."""


_HASHED = re.compile(r"^hashed-attn-(\d+)$")


def _seed_from(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class HashedAttentionEncoder:
    """Deterministic offline encoder: hashed embeddings + one mixing layer."""

    def __init__(self, name: str, dim: int):
        self.name = name
        self.dim = dim
        rng = np.random.Generator(np.random.PCG64(_seed_from(name + ":mixer")))
        scale = 1.0 / np.sqrt(dim)
        self._w_query = rng.normal(scale=scale, size=(dim, dim))
        self._w_key = rng.normal(scale=scale, size=(dim, dim))
        self._w_value = rng.normal(scale=scale, size=(dim, dim))
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is None:
            rng = np.random.Generator(np.random.PCG64(_seed_from(self.name + ":tok:" + token)))
            cached = rng.normal(size=self.dim)
            self._token_cache[token] = cached
        return cached

    def encode(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        base = np.stack([self._token_vector(t) for t in tokens])  # (n, dim)
        query = base @ self._w_query
        key = base @ self._w_key
        value = base @ self._w_value
        logits = query @ key.T / np.sqrt(self.dim)
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        weights /= weights.sum(axis=1, keepdims=True)
        mixed = base + weights @ value
        return np.ascontiguousarray(mixed.T, dtype=np.float64)  # (dim, n)


class TransformersEncoder:
    """Frozen transformers model; last hidden state per (sub)token."""

    def __init__(self, name_or_path: str, max_sequence_length: int):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"encoder {name_or_path!r} needs the transformers/torch extras: "
                f"pip install 'textad-export[hub]' ({exc})"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(name_or_path)
            self._model = AutoModel.from_pretrained(name_or_path)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"could not load encoder {name_or_path!r}; download it on a machine "
                f"with network access (e.g. `AutoModel.from_pretrained({name_or_path!r})`) "
                f"and point encoder_name at the saved directory ({exc})"
            ) from exc
        self._torch = torch
        self._model.eval()
        self.name = name_or_path
        self.dim = int(self._model.config.hidden_size)
        self.max_sequence_length = max_sequence_length

    def encode(self, tokens: list[str]) -> np.ndarray:
        if not tokens:
            raise ValueError("cannot encode an empty token sequence")
        text = " ".join(tokens)
        batch = self._tokenizer(
            text,
            return_tensors="pt",
            truncation=True,
            max_length=self.max_sequence_length,
        )
        with self._torch.no_grad():
            hidden = self._model(**batch).last_hidden_state[0]
        return np.ascontiguousarray(hidden.numpy().T, dtype=np.float64)


def load_encoder(name: str, max_sequence_length: int):
    """Resolve an encoder name; built-in hashed family first, hub otherwise."""
    match = _HASHED.match(name)
    if match:
        dim = int(match.group(1))
        if dim < 1:
            raise ValueError(f"encoder {name!r} has a non-positive dimension")
        return HashedAttentionEncoder(name, dim)
    return TransformersEncoder(name, max_sequence_length)
