"""Command-line entry point mirroring the ExportJob fields."""

from __future__ import annotations

import argparse
import logging
import sys

from .corpora import CORPORA, CorpusUnavailableError
from .encoders import EncoderUnavailableError
from .export import ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textad-export",
        description="Export token-level text embeddings into detector archives",
    )
    parser.add_argument("--corpus", required=True, choices=CORPORA)
    parser.add_argument("--inlier-class", required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument(
        "--encoder",
        default="hashed-attn-64",
        help="hashed-attn-<dim> (offline) or a transformers model path/id",
    )
    parser.add_argument("--max-seq-len", type=int, default=128)
    parser.add_argument("--data-dir", default=None, help="corpus location (see --corpus)")
    parser.add_argument("--split", choices=("train", "test"), default="train")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus=args.corpus,
        inlier_class=args.inlier_class,
        out_dir=args.out_dir,
        encoder_name=args.encoder,
        max_sequence_length=args.max_seq_len,
        data_dir=args.data_dir,
        split=args.split,
    )
    try:
        result = export(job)
    except (CorpusUnavailableError, EncoderUnavailableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for label, count in sorted(result.document_counts.items()):
        role = "inliers" if label == job.inlier_class else "outliers"
        print(f"{label}: {count} documents ({role}) -> {result.archive_paths[label]}")
    if result.skipped:
        print(f"skipped {result.skipped} documents that were empty after preprocessing")
    print(f"dim {result.dim}; wrote {result.manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
