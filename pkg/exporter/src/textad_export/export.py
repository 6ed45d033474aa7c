"""Export job: corpus -> preprocessing -> token embeddings -> archives + manifest.

One archive is written per class (the inlier class plus every other class
as an outlier class), in deterministic document order, and a manifest ties
them together in the detector's JSON schema. Embeddings are frozen: the
encoder is never fine-tuned here.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

from .archive_writer import write_archive
from .corpora import load_corpus
from .encoders import load_encoder
from .preprocess import preprocess, stopword_tooling

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass
class ExportJob:
    corpus: str
    inlier_class: str
    out_dir: str
    encoder_name: str = "hashed-attn-64"
    max_sequence_length: int = 128
    data_dir: str | None = None
    split: str = "train"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_sequence_length < 1:
            raise ValueError(
                f"max_sequence_length must be >= 1, got {self.max_sequence_length}"
            )
        if self.split not in ("train", "test"):
            raise ValueError(f"split must be 'train' or 'test', got {self.split!r}")


@dataclass
class ExportResult:
    manifest_path: str
    archive_paths: dict[str, str]
    document_counts: dict[str, int]
    skipped: int
    dim: int


def export(job: ExportJob) -> ExportResult:
    """Run the whole job; returns where everything was written."""
    documents = load_corpus(job.corpus, job.data_dir, job.split)
    labels = sorted({doc.class_label for doc in documents})
    if job.inlier_class not in labels:
        raise ValueError(
            f"inlier_class {job.inlier_class!r} not in corpus labels {labels}"
        )
    encoder = load_encoder(job.encoder_name, job.max_sequence_length)

    encoded: dict[str, list] = {label: [] for label in labels}
    skipped = 0
    for doc in documents:
        tokens = preprocess(doc.text)
        if not tokens:
            skipped += 1
            logger.info("skipping %s: empty after preprocessing", doc.doc_id)
            continue
        tokens = tokens[: job.max_sequence_length]
        matrix = encoder.encode(tokens)
        if matrix.shape[0] != encoder.dim:
            raise RuntimeError(
                f"encoder returned dim {matrix.shape[0]}, declared {encoder.dim}"
            )
        encoded[doc.class_label].append((doc.doc_id, matrix))

    empty = [label for label, docs in encoded.items() if not docs]
    if empty:
        raise ValueError(f"classes {empty} have no documents left after preprocessing")

    os.makedirs(job.out_dir, exist_ok=True)
    archive_paths = {}
    for label in labels:
        filename = f"{_safe(label)}.emb"
        write_archive(os.path.join(job.out_dir, filename), encoded[label])
        archive_paths[label] = filename

    manifest = {
        "version": MANIFEST_VERSION,
        "inliers": {
            "archive": archive_paths[job.inlier_class],
            "doc_ids": [doc_id for doc_id, _ in encoded[job.inlier_class]],
            "class_label": job.inlier_class,
        },
        "outliers": [
            {
                "archive": archive_paths[label],
                "doc_ids": [doc_id for doc_id, _ in encoded[label]],
                "class_label": label,
            }
            for label in labels
            if label != job.inlier_class
        ],
        "metadata": {
            "source": job.corpus,
            "split": job.split,
            "inlier_class": job.inlier_class,
            "outlier_classes": [label for label in labels if label != job.inlier_class],
            "encoder": encoder.name,
            "encoder_dim": encoder.dim,
            "max_sequence_length": job.max_sequence_length,
            "preprocessing": "lowercase, strip punctuation and digits, drop stopwords",
            "stopword_tooling": stopword_tooling(),
            "skipped_empty_documents": skipped,
            **job.metadata,
        },
    }
    manifest_path = os.path.join(job.out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExportResult(
        manifest_path=manifest_path,
        archive_paths={label: os.path.join(job.out_dir, name) for label, name in archive_paths.items()},
        document_counts={label: len(docs) for label, docs in encoded.items()},
        skipped=skipped,
        dim=encoder.dim,
    )


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)
