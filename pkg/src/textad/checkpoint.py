"""Self-describing binary training checkpoints with a JSON sidecar.

Layout (integers little-endian, floats IEEE-754 binary64 little-endian):

    magic               8 bytes  b"ADCKPT\\0\\0"
    format version      u32      currently 1
    config JSON length  u64      followed by that many utf-8 bytes
    dim, width, heads   u32 each
    token_proj          dim*width float64, row-major
    head_proj           width*heads float64, row-major
    adam step count     u64
    adam moments        4 matrices (m1, v1 for token_proj; m2, v2 for
                        head_proj), same shapes and order as the params
    rng JSON length     u64      followed by the serialized generator state
    completed epochs    u64
    history count       u32      entries: u64 epoch + float64 mean loss

The sidecar ``<path>.json`` repeats the resolved config in human-readable
form. Identical runs produce byte-identical checkpoint files; resuming from
a checkpoint restores the exact generator state, so the parameter
trajectory continues bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import DataFormatError
from .model import AttentionParams

MAGIC = b"ADCKPT\x00\x00"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")


@dataclass
class AdamState:
    """First/second moment estimates and the shared step counter."""

    step: int
    m_token: np.ndarray
    v_token: np.ndarray
    m_head: np.ndarray
    v_head: np.ndarray

    @classmethod
    def zeros(cls, params: AttentionParams) -> "AdamState":
        return cls(
            step=0,
            m_token=np.zeros_like(params.token_proj),
            v_token=np.zeros_like(params.token_proj),
            m_head=np.zeros_like(params.head_proj),
            v_head=np.zeros_like(params.head_proj),
        )


@dataclass
class Checkpoint:
    params: AttentionParams
    config: RunConfig
    adam: AdamState
    rng_state: dict
    epoch: int
    loss_history: list[tuple[int, float]] = field(default_factory=list)


def _write_matrix(fh, matrix: np.ndarray) -> None:
    fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes(order="C"))


def _read_matrix(fh, shape: tuple[int, int], path) -> np.ndarray:
    count = shape[0] * shape[1]
    raw = fh.read(count * 8)
    if len(raw) != count * 8:
        raise DataFormatError(f"{path}: truncated matrix payload")
    return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()


def _write_blob(fh, payload: bytes) -> None:
    fh.write(_U64.pack(len(payload)))
    fh.write(payload)


def _read_exact(fh, count: int, path) -> bytes:
    raw = fh.read(count)
    if len(raw) != count:
        raise DataFormatError(f"{path}: truncated checkpoint (wanted {count} bytes)")
    return raw


def _read_blob(fh, path) -> bytes:
    (length,) = _U64.unpack(_read_exact(fh, 8, path))
    return _read_exact(fh, length, path)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = str(path)
    config_json = ckpt.config.to_json(indent=None).encode("utf-8")
    rng_json = json.dumps(ckpt.rng_state, sort_keys=True, separators=(",", ":")).encode("utf-8")
    params = ckpt.params
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(VERSION))
        _write_blob(fh, config_json)
        fh.write(_U32.pack(params.dim))
        fh.write(_U32.pack(params.width))
        fh.write(_U32.pack(params.heads))
        _write_matrix(fh, params.token_proj)
        _write_matrix(fh, params.head_proj)
        fh.write(_U64.pack(ckpt.adam.step))
        _write_matrix(fh, ckpt.adam.m_token)
        _write_matrix(fh, ckpt.adam.v_token)
        _write_matrix(fh, ckpt.adam.m_head)
        _write_matrix(fh, ckpt.adam.v_head)
        _write_blob(fh, rng_json)
        fh.write(_U64.pack(ckpt.epoch))
        fh.write(_U32.pack(len(ckpt.loss_history)))
        for epoch, loss in ckpt.loss_history:
            fh.write(_U64.pack(epoch))
            fh.write(_F64.pack(loss))
    with open(path + ".json", "w", encoding="utf-8") as fh:
        fh.write(ckpt.config.to_json())
        fh.write("\n")


def load_checkpoint(path) -> Checkpoint:
    path = str(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}, not a checkpoint")
        (version,) = _U32.unpack(_read_exact(fh, 4, path))
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        config = RunConfig.from_dict(json.loads(_read_blob(fh, path).decode("utf-8")))
        dim, width, heads = struct.unpack("<III", _read_exact(fh, 12, path))
        token_proj = _read_matrix(fh, (dim, width), path)
        head_proj = _read_matrix(fh, (width, heads), path)
        (step,) = _U64.unpack(_read_exact(fh, 8, path))
        adam = AdamState(
            step=step,
            m_token=_read_matrix(fh, (dim, width), path),
            v_token=_read_matrix(fh, (dim, width), path),
            m_head=_read_matrix(fh, (width, heads), path),
            v_head=_read_matrix(fh, (width, heads), path),
        )
        rng_state = json.loads(_read_blob(fh, path).decode("utf-8"))
        (epoch,) = _U64.unpack(_read_exact(fh, 8, path))
        (history_count,) = _U32.unpack(_read_exact(fh, 4, path))
        history = []
        for _ in range(history_count):
            (ep,) = _U64.unpack(_read_exact(fh, 8, path))
            (loss,) = _F64.unpack(_read_exact(fh, 8, path))
            history.append((ep, loss))
    return Checkpoint(
        params=AttentionParams(token_proj, head_proj),
        config=config,
        adam=adam,
        rng_state=rng_state,
        epoch=int(epoch),
        loss_history=history,
    )


def inspect_checkpoint(path) -> dict:
    ckpt = load_checkpoint(path)
    return {
        "kind": "checkpoint",
        "path": str(path),
        "version": VERSION,
        "dim": ckpt.params.dim,
        "attention_width": ckpt.params.width,
        "head_count": ckpt.params.heads,
        "adam_step": ckpt.adam.step,
        "epoch": ckpt.epoch,
        "epochs_configured": ckpt.config.epochs,
        "loss_history_entries": len(ckpt.loss_history),
        "final_mean_loss": ckpt.loss_history[-1][1] if ckpt.loss_history else None,
    }
