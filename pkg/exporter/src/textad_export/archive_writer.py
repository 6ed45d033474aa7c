"""Writer for the embedding-archive byte format consumed by the detector.

Re-implemented against the published layout rather than imported, so this
package stays independent of the detection package:

    header   magic b"EMBARCH\\0", u32 version=1, u32 dim, u32 doc_count,
             u32 float_width=64
    records  per document: u32 id length, utf-8 id, u32 token count,
             dim*count float64 row-major little-endian
    index    doc_count u64 record offsets, then a u64 index offset footer
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EMBARCH\x00"
VERSION = 1
FLOAT_WIDTH = 64

_HEADER = struct.Struct("<8sIIII")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def write_archive(path, documents: list[tuple[str, np.ndarray]]) -> None:
    """Write (doc_id, dim x n matrix) pairs; all matrices share one dim."""
    if not documents:
        raise ValueError("refusing to write an archive with zero documents")
    dim = documents[0][1].shape[0]
    seen: set[str] = set()
    for doc_id, matrix in documents:
        if matrix.ndim != 2 or matrix.shape[0] != dim or matrix.shape[1] < 1:
            raise ValueError(
                f"document {doc_id!r} has shape {matrix.shape}, expected ({dim}, >=1)"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError(f"document {doc_id!r} has non-finite embeddings")
        if doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)

    offsets = []
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(documents), FLOAT_WIDTH))
        for doc_id, matrix in documents:
            offsets.append(fh.tell())
            ident = doc_id.encode("utf-8")
            fh.write(_U32.pack(len(ident)))
            fh.write(ident)
            fh.write(_U32.pack(matrix.shape[1]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes(order="C"))
        index_offset = fh.tell()
        for offset in offsets:
            fh.write(_U64.pack(offset))
        fh.write(_U64.pack(index_offset))
