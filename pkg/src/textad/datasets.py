"""Dataset manifests, split assembly, and the synthetic testbed generator.

A manifest names which documents of which archives form a labeled dataset:
one inlier entry plus one entry per outlier class. Paths are stored as
written and resolved relative to the manifest's directory on load, so a
dataset directory can be moved wholesale.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .archive import Archive, write_archive
from .errors import ConfigError, DataFormatError, ShapeMismatchError
from .model import EmbeddingSequence, LabeledExample

MANIFEST_VERSION = 1


@dataclass
class ManifestEntry:
    """One archive plus the doc_ids drawn from it."""

    archive: str
    doc_ids: list[str]
    class_label: str | None = None


@dataclass
class DatasetManifest:
    inliers: ManifestEntry
    outliers: list[ManifestEntry]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.inliers, dict):
            self.inliers = ManifestEntry(**self.inliers)
        self.outliers = [
            ManifestEntry(**entry) if isinstance(entry, dict) else entry
            for entry in self.outliers
        ]
        inlier_ids = set(self.inliers.doc_ids)
        outlier_ids: set[str] = set()
        for entry in self.outliers:
            outlier_ids.update(entry.doc_ids)
        overlap = inlier_ids & outlier_ids
        if overlap:
            raise DataFormatError(
                f"manifest doc_id sets overlap between inliers and outliers: "
                f"{sorted(overlap)[:5]}"
            )

    @property
    def outlier_doc_count(self) -> int:
        return sum(len(entry.doc_ids) for entry in self.outliers)

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "inliers": asdict(self.inliers),
            "outliers": [asdict(entry) for entry in self.outliers],
            "metadata": self.metadata,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or data.get("version") != MANIFEST_VERSION:
        raise DataFormatError(f"manifest {path} has a missing or unsupported version")
    try:
        return DatasetManifest(
            inliers=data["inliers"],
            outliers=data["outliers"],
            metadata=data.get("metadata", {}),
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"manifest {path} is malformed: {exc}") from exc


@dataclass
class TrainingSet:
    """In-memory labeled training data: abundant inliers, few outliers."""

    inliers: list[EmbeddingSequence]
    outliers: list[EmbeddingSequence]

    def __post_init__(self):
        dims = {seq.dim for seq in self.inliers} | {seq.dim for seq in self.outliers}
        if len(dims) > 1:
            raise ShapeMismatchError(
                f"all documents in a dataset must share one embedding dim, found {sorted(dims)}"
            )

    @property
    def dim(self) -> int:
        if self.inliers:
            return self.inliers[0].dim
        if self.outliers:
            return self.outliers[0].dim
        raise ConfigError("dataset is empty")


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _load_entry(entry: ManifestEntry, base_dir: str) -> list[EmbeddingSequence]:
    archive = Archive(_resolve(base_dir, entry.archive))
    return archive.load(entry.doc_ids)


def load_training_set(manifest: DatasetManifest, base_dir: str = ".") -> TrainingSet:
    inliers = _load_entry(manifest.inliers, base_dir)
    outliers: list[EmbeddingSequence] = []
    for entry in manifest.outliers:
        outliers.extend(_load_entry(entry, base_dir))
    return TrainingSet(inliers=inliers, outliers=outliers)


def load_labeled_examples(manifest: DatasetManifest, base_dir: str = ".") -> list[LabeledExample]:
    """Manifest as a flat labeled list (0 = inlier, 1 = outlier), for scoring."""
    data = load_training_set(manifest, base_dir)
    return [LabeledExample(seq, 0) for seq in data.inliers] + [
        LabeledExample(seq, 1) for seq in data.outliers
    ]


def build_split(
    inlier_archive: str,
    outlier_archives: list[str | tuple[str, str]],
    outlier_count: int,
    seed: int,
    base_dir: str = ".",
    metadata: dict | None = None,
) -> DatasetManifest:
    """Assemble a few-shot manifest: every inlier, a small outlier sample.

    ``outlier_archives`` holds one archive per outlier class, optionally as
    ``(path, class_label)`` pairs. The outlier budget is split as evenly as
    possible across classes, remainder going to the earlier classes, and is
    sampled uniformly without replacement within each class.
    """
    if not outlier_archives:
        raise ConfigError("at least one outlier archive is required")
    if outlier_count < len(outlier_archives):
        raise ConfigError(
            f"outlier_count {outlier_count} cannot cover {len(outlier_archives)} "
            f"outlier classes with at least one document each"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    inliers = Archive(_resolve(base_dir, inlier_archive))

    labeled: list[tuple[str, str]] = []
    for item in outlier_archives:
        if isinstance(item, tuple):
            labeled.append(item)
        else:
            stem = os.path.splitext(os.path.basename(item))[0]
            labeled.append((item, stem))

    n_classes = len(labeled)
    base, remainder = divmod(outlier_count, n_classes)
    entries = []
    seen_inlier_ids = set(inliers.doc_ids)
    for idx, (path, label) in enumerate(labeled):
        share = base + (1 if idx < remainder else 0)
        archive = Archive(_resolve(base_dir, path))
        ids = archive.doc_ids
        if len(ids) < share:
            raise ConfigError(
                f"outlier class {label!r} has only {len(ids)} documents, "
                f"needs {share} for this split"
            )
        chosen_pos = rng.choice(len(ids), size=share, replace=False)
        chosen = sorted(ids[pos] for pos in chosen_pos)
        clash = seen_inlier_ids.intersection(chosen)
        if clash:
            raise DataFormatError(
                f"outlier class {label!r} shares doc_ids with the inlier archive: "
                f"{sorted(clash)[:5]}"
            )
        entries.append(ManifestEntry(archive=path, doc_ids=chosen, class_label=label))

    meta = {
        "outlier_count": outlier_count,
        "creation_seed": seed,
        "outlier_classes": [label for _, label in labeled],
    }
    if metadata:
        meta.update(metadata)
    return DatasetManifest(
        inliers=ManifestEntry(archive=inlier_archive, doc_ids=inliers.doc_ids),
        outliers=entries,
        metadata=meta,
    )


def generate_synthetic(
    dim: int,
    inlier_count: int,
    outlier_count: int,
    length_range: tuple[int, int],
    shift: float,
    seed: int,
    id_prefix: str = "",
) -> tuple[list[EmbeddingSequence], list[EmbeddingSequence]]:
    """Gaussian testbed: inlier tokens ~ N(0, I), outlier tokens mean-shifted.

    The shift vector has the requested norm along one seeded random
    direction shared by every outlier document. ``shift=0`` produces two
    statistically identical classes (a null testbed). Token counts are
    uniform over the inclusive ``length_range``.
    """
    lo, hi = length_range
    if dim < 1 or inlier_count < 1 or outlier_count < 1:
        raise ConfigError("dim and document counts must all be >= 1")
    if lo < 1 or hi < lo:
        raise ConfigError(f"invalid document length range {length_range}")
    if shift < 0:
        raise ConfigError(f"shift must be >= 0, got {shift}")
    rng = np.random.Generator(np.random.PCG64(seed))
    direction = rng.normal(size=dim)
    norm = np.linalg.norm(direction)
    if norm == 0.0:  # probability zero, but keep the contract total
        direction = np.zeros(dim)
        direction[0] = 1.0
        norm = 1.0
    offset = (shift / norm) * direction

    def make_docs(count: int, mean_offset: np.ndarray, prefix: str) -> list[EmbeddingSequence]:
        docs = []
        for i in range(count):
            n_tokens = int(rng.integers(lo, hi + 1))
            tokens = rng.normal(size=(dim, n_tokens)) + mean_offset[:, None]
            docs.append(EmbeddingSequence(tokens=tokens, doc_id=f"{id_prefix}{prefix}{i:06d}"))
        return docs

    inliers = make_docs(inlier_count, np.zeros(dim), "inlier-")
    outliers = make_docs(outlier_count, offset, "outlier-")
    return inliers, outliers


def write_synthetic_archives(
    out_dir: str,
    dim: int,
    inlier_count: int,
    outlier_count: int,
    length_range: tuple[int, int],
    shift: float,
    seed: int,
    id_prefix: str = "",
) -> tuple[str, str]:
    """Generate and persist a synthetic dataset; returns the two archive paths."""
    inliers, outliers = generate_synthetic(
        dim, inlier_count, outlier_count, length_range, shift, seed, id_prefix=id_prefix
    )
    os.makedirs(out_dir, exist_ok=True)
    inlier_path = os.path.join(out_dir, "inliers.emb")
    outlier_path = os.path.join(out_dir, "outliers.emb")
    write_archive(inlier_path, inliers)
    write_archive(outlier_path, outliers)
    return inlier_path, outlier_path
