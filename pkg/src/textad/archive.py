"""Bit-exact binary container for per-document token embedding matrices.

Layout (all integers little-endian, floats IEEE-754 binary64 little-endian):

    header   0: magic               8 bytes  b"EMBARCH\\0"
             8: format version      u32      currently 1
            12: embedding dim d     u32
            16: document count      u32
            20: float width (bits)  u32      always 64 in version 1
    records  one per document, in export order:
                doc_id length       u32
                doc_id              utf-8 bytes
                token count n       u32
                matrix payload      d*n float64, row-major (d rows of n)
    index    document count * u64: absolute file offset of each record
    footer   u64: absolute file offset of the index

Archives are immutable after creation: one writer, any number of readers.
Matrices round-trip bit-exactly. Document order inside the file is export
order; all sampling elsewhere works on doc_ids, never on positions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFormatError, ShapeMismatchError
from .model import EmbeddingSequence

MAGIC = b"EMBARCH\x00"
VERSION = 1
FLOAT_WIDTH = 64

_HEADER = struct.Struct("<8sIIII")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def write_archive(path, sequences: Sequence[EmbeddingSequence]) -> None:
    """Write sequences to ``path``; all must share one embedding dimension."""
    sequences = list(sequences)
    if not sequences:
        raise DataFormatError("refusing to write an archive with zero documents")
    dim = sequences[0].dim
    seen: set[str] = set()
    for seq in sequences:
        if seq.dim != dim:
            raise ShapeMismatchError(
                f"document {seq.doc_id!r} has dim {seq.dim}, expected {dim}"
            )
        if seq.doc_id in seen:
            raise DataFormatError(f"duplicate doc_id {seq.doc_id!r}")
        seen.add(seq.doc_id)

    offsets = []
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(sequences), FLOAT_WIDTH))
        for seq in sequences:
            offsets.append(fh.tell())
            ident = seq.doc_id.encode("utf-8")
            fh.write(_U32.pack(len(ident)))
            fh.write(ident)
            fh.write(_U32.pack(seq.n_tokens))
            fh.write(np.ascontiguousarray(seq.tokens, dtype="<f8").tobytes(order="C"))
        index_offset = fh.tell()
        for off in offsets:
            fh.write(_U64.pack(off))
        fh.write(_U64.pack(index_offset))


@dataclass
class ArchiveHeader:
    dim: int
    doc_count: int
    version: int
    float_width: int


class Archive:
    """Read-only view of an archive: header, id index, per-document access."""

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            self._header, self._offsets = _read_header_and_index(fh, path)
            self._doc_ids, self._by_id = self._read_ids(fh)

    @property
    def dim(self) -> int:
        return self._header.dim

    @property
    def doc_count(self) -> int:
        return self._header.doc_count

    @property
    def doc_ids(self) -> list[str]:
        return list(self._doc_ids)

    def _read_ids(self, fh) -> tuple[list[str], dict[str, int]]:
        ids = []
        by_id = {}
        for pos, offset in enumerate(self._offsets):
            fh.seek(offset)
            ident, _ = _read_record_prefix(fh, self.path)
            if ident in by_id:
                raise DataFormatError(f"{self.path}: duplicate doc_id {ident!r}")
            by_id[ident] = pos
            ids.append(ident)
        return ids, by_id

    def get(self, doc_id: str) -> EmbeddingSequence:
        if doc_id not in self._by_id:
            raise DataFormatError(f"{self.path}: no document with id {doc_id!r}")
        with open(self.path, "rb") as fh:
            return self._read_at(fh, self._by_id[doc_id])

    def load(self, doc_ids: Iterable[str] | None = None) -> list[EmbeddingSequence]:
        """Load the named documents (or every document) in the given order."""
        with open(self.path, "rb") as fh:
            if doc_ids is None:
                return [self._read_at(fh, pos) for pos in range(self.doc_count)]
            out = []
            for doc_id in doc_ids:
                if doc_id not in self._by_id:
                    raise DataFormatError(f"{self.path}: no document with id {doc_id!r}")
                out.append(self._read_at(fh, self._by_id[doc_id]))
            return out

    def _read_at(self, fh, pos: int) -> EmbeddingSequence:
        fh.seek(self._offsets[pos])
        ident, n_tokens = _read_record_prefix(fh, self.path)
        payload = fh.read(self.dim * n_tokens * 8)
        if len(payload) != self.dim * n_tokens * 8:
            raise DataFormatError(f"{self.path}: truncated matrix payload for {ident!r}")
        matrix = np.frombuffer(payload, dtype="<f8").reshape(self.dim, n_tokens).copy()
        return EmbeddingSequence(tokens=matrix, doc_id=ident)


def read_archive(path) -> list[EmbeddingSequence]:
    """Load every document of an archive in export order."""
    return Archive(path).load()


def _read_header_and_index(fh, path) -> tuple[ArchiveHeader, list[int]]:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise DataFormatError(f"{path}: file too short for an archive header")
    magic, version, dim, doc_count, float_width = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}, not an embedding archive")
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")
    if float_width != FLOAT_WIDTH:
        raise DataFormatError(f"{path}: unsupported float width {float_width}")
    if dim < 1:
        raise DataFormatError(f"{path}: embedding dim must be >= 1, got {dim}")
    fh.seek(0, 2)
    file_size = fh.tell()
    if file_size < _HEADER.size + 8:
        raise DataFormatError(f"{path}: file too short to hold an index footer")
    fh.seek(file_size - 8)
    (index_offset,) = _U64.unpack(fh.read(8))
    expected_index_bytes = doc_count * 8
    if index_offset < _HEADER.size or index_offset + expected_index_bytes + 8 != file_size:
        raise DataFormatError(f"{path}: index offset {index_offset} is inconsistent")
    fh.seek(index_offset)
    raw_index = fh.read(expected_index_bytes)
    offsets = [u[0] for u in _U64.iter_unpack(raw_index)]
    prev = _HEADER.size - 1
    for off in offsets:
        if not _HEADER.size <= off < index_offset or off <= prev:
            raise DataFormatError(f"{path}: record offset {off} is out of order or out of range")
        prev = off
    return ArchiveHeader(dim=dim, doc_count=doc_count, version=version, float_width=float_width), offsets


def _read_record_prefix(fh, path) -> tuple[str, int]:
    raw = fh.read(4)
    if len(raw) != 4:
        raise DataFormatError(f"{path}: truncated record prefix")
    (id_len,) = _U32.unpack(raw)
    ident_bytes = fh.read(id_len)
    if len(ident_bytes) != id_len:
        raise DataFormatError(f"{path}: truncated doc_id")
    try:
        ident = ident_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: doc_id is not valid utf-8") from exc
    raw = fh.read(4)
    if len(raw) != 4:
        raise DataFormatError(f"{path}: truncated token count")
    (n_tokens,) = _U32.unpack(raw)
    if n_tokens < 1:
        raise DataFormatError(f"{path}: document {ident!r} has zero tokens")
    return ident, n_tokens


def inspect_archive(path) -> dict:
    """Header-and-index summary; never touches matrix payloads."""
    with open(path, "rb") as fh:
        header, offsets = _read_header_and_index(fh, path)
    return {
        "kind": "embedding-archive",
        "path": str(path),
        "version": header.version,
        "dim": header.dim,
        "doc_count": header.doc_count,
        "float_width": header.float_width,
        "index_entries": len(offsets),
    }


def validate_archive(path) -> list[str]:
    """Full-content validation. Returns warnings; hard corruption raises.

    Loading itself enforces the format invariants (magic, version, index
    consistency, finite payloads), so warnings cover only soft problems.
    """
    warnings: list[str] = []
    archive = Archive(path)
    for seq in archive.load():
        if seq.doc_id == "":
            warnings.append("document with empty doc_id")
        if seq.n_tokens == 1:
            continue
        if np.ptp(seq.tokens) == 0.0:
            warnings.append(f"document {seq.doc_id!r} is a constant matrix")
    return warnings
