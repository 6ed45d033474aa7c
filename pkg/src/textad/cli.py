"""Command-line interface.

Subcommands: make-synthetic, split, train, score, eval, sweep, inspect.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
Every training or sweep run writes its resolved config beside its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys

from .archive import inspect_archive, validate_archive
from .checkpoint import inspect_checkpoint, load_checkpoint
from .config import load_config, save_config
from .datasets import (
    build_split,
    load_labeled_examples,
    load_manifest,
    load_training_set,
    write_synthetic_archives,
)
from .errors import (
    ConfigError,
    DataFormatError,
    MetricUndefinedError,
    NumericError,
    ShapeMismatchError,
)
from .metrics import ScoredSet, metric_report, score_dataset
from .model import LabeledExample
from .sweep import SweepData, SweepSpec, run_sweep
from .trainer import train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _manifest_dir(path: str) -> str:
    return os.path.dirname(os.path.abspath(path))


def cmd_make_synthetic(args) -> int:
    inlier_path, outlier_path = write_synthetic_archives(
        args.out_dir,
        dim=args.dim,
        inlier_count=args.inliers,
        outlier_count=args.outliers,
        length_range=(args.min_tokens, args.max_tokens),
        shift=args.shift,
        seed=args.seed,
        id_prefix=args.prefix,
    )
    print(f"wrote {inlier_path}")
    print(f"wrote {outlier_path}")
    return 0


def cmd_split(args) -> int:
    labels = None
    if args.outlier_labels:
        labels = [s.strip() for s in args.outlier_labels.split(",")]
        if len(labels) != len(args.outlier_archive):
            raise ConfigError(
                f"{len(labels)} labels given for {len(args.outlier_archive)} outlier archives"
            )
    archives = (
        list(zip(args.outlier_archive, labels)) if labels else list(args.outlier_archive)
    )
    manifest = build_split(
        args.inlier_archive, archives, outlier_count=args.outlier_count, seed=args.seed
    )
    out_dir = _manifest_dir(args.out)
    os.makedirs(out_dir, exist_ok=True)
    manifest.inliers.archive = os.path.relpath(os.path.abspath(manifest.inliers.archive), out_dir)
    for entry in manifest.outliers:
        entry.archive = os.path.relpath(os.path.abspath(entry.archive), out_dir)
    manifest.save(args.out)
    print(f"wrote {args.out} ({len(manifest.inliers.doc_ids)} inliers, "
          f"{manifest.outlier_doc_count} outliers)")
    return 0


def _latest_checkpoint(out_dir: str) -> str:
    pattern = re.compile(r"^epoch-(\d+)\.ckpt$")
    best = None
    best_epoch = -1
    for name in os.listdir(out_dir):
        match = pattern.match(name)
        if match and int(match.group(1)) > best_epoch:
            best_epoch = int(match.group(1))
            best = os.path.join(out_dir, name)
    if best is None:
        raise DataFormatError(f"no epoch-*.ckpt checkpoints found in {out_dir}")
    return best


def cmd_train(args) -> int:
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s"
    )
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    data = load_training_set(manifest, _manifest_dir(args.manifest))
    os.makedirs(args.out_dir, exist_ok=True)
    save_config(cfg, os.path.join(args.out_dir, "config.json"))
    resume_from = _latest_checkpoint(args.out_dir) if args.resume else None
    ckpt = train(data, cfg, args.out_dir, resume_from=resume_from)
    final = os.path.join(args.out_dir, f"epoch-{ckpt.epoch:05d}.ckpt")
    print(f"finished epoch {ckpt.epoch}; final checkpoint: {final}")
    return 0


def _load_examples_for_scoring(args) -> list[LabeledExample]:
    if args.manifest:
        return load_labeled_examples(load_manifest(args.manifest), _manifest_dir(args.manifest))
    from .archive import read_archive

    if not args.archive:
        raise ConfigError("score needs either --manifest or --archive")
    if args.label not in (0, 1):
        raise ConfigError("--label must be 0 or 1 when scoring a bare archive")
    return [LabeledExample(seq, args.label) for seq in read_archive(args.archive)]


def cmd_score(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    examples = _load_examples_for_scoring(args)
    scored = score_dataset(examples, ckpt.params, ckpt.config)
    lines = [f"{doc_id}\t{score!r}\t{label}" for doc_id, score, label in scored.ranked()]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(lines)} documents, most anomalous first)")
    else:
        sys.stdout.write(text)
    return 0


def _read_scores_tsv(path: str) -> ScoredSet:
    entries = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise DataFormatError(
                        f"{path}:{lineno}: expected doc_id<TAB>score<TAB>label"
                    )
                entries.append((parts[0], float(parts[1]), int(parts[2])))
    except OSError as exc:
        raise DataFormatError(f"cannot read scores file {path}: {exc}") from exc
    except ValueError as exc:
        raise DataFormatError(f"{path}: malformed score line: {exc}") from exc
    return ScoredSet(entries=entries)


def cmd_eval(args) -> int:
    if args.scores:
        scored = _read_scores_tsv(args.scores)
    else:
        if not (args.checkpoint and args.manifest):
            raise ConfigError("eval needs either --scores or both --checkpoint and --manifest")
        ckpt = load_checkpoint(args.checkpoint)
        examples = load_labeled_examples(load_manifest(args.manifest), _manifest_dir(args.manifest))
        scored = score_dataset(examples, ckpt.params, ckpt.config)
    _write_json(metric_report(scored), args.out)
    return 0


def cmd_sweep(args) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataFormatError(f"cannot read sweep spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"sweep spec {args.spec} is not valid JSON: {exc}") from exc
    try:
        spec = SweepSpec(
            axis=raw["axis"],
            values=raw["values"],
            base=raw.get("base", {}),
            repeats=raw.get("repeats", 5),
            labeled_outlier_count=raw.get("labeled_outlier_count", 10),
        )
    except KeyError as exc:
        raise DataFormatError(f"sweep spec {args.spec} is missing field {exc}") from exc
    train_manifest = load_manifest(args.train_manifest)
    test_manifest = load_manifest(args.test_manifest)
    data = SweepData(
        train=load_training_set(train_manifest, _manifest_dir(args.train_manifest)),
        test=load_labeled_examples(test_manifest, _manifest_dir(args.test_manifest)),
    )
    os.makedirs(args.out_dir, exist_ok=True)
    save_config(spec.base, os.path.join(args.out_dir, "base-config.json"))
    checkpoint_root = os.path.join(args.out_dir, "checkpoints") if args.keep_checkpoints else None
    report = run_sweep(spec, data, checkpoint_root)
    with open(os.path.join(args.out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_json_doc(), fh, indent=2)
        fh.write("\n")
    with open(os.path.join(args.out_dir, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_tsv())
    with open(os.path.join(args.out_dir, "series.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_series_csv())
    for row in report.summary():
        if "mean_auroc" in row:
            print(
                f"{spec.axis}={row['value']}: auroc {row['mean_auroc']:.4f}"
                f" +/- {row['std_auroc']:.4f}, auprc {row['mean_auprc']:.4f}"
                f" +/- {row['std_auprc']:.4f} ({row['repeats']} repeats)"
            )
        else:
            print(f"{spec.axis}={row['value']}: skipped ({row.get('skipped', 'infeasible')})")
    print(f"wrote {args.out_dir}/report.json, report.tsv, series.csv")
    return 0


def cmd_inspect(args) -> int:
    if args.archive:
        info = inspect_archive(args.archive)
        warnings = validate_archive(args.archive) if args.full else []
        info["warnings"] = warnings
        _write_json(info, None)
        if warnings and args.strict:
            return 2
        return 0
    if args.checkpoint:
        _write_json(inspect_checkpoint(args.checkpoint), None)
        return 0
    manifest = load_manifest(args.manifest)
    _write_json(
        {
            "kind": "dataset-manifest",
            "path": args.manifest,
            "inlier_count": len(manifest.inliers.doc_ids),
            "outlier_count": manifest.outlier_doc_count,
            "outlier_classes": [entry.class_label for entry in manifest.outliers],
            "metadata": manifest.metadata,
        },
        None,
    )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="textad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-synthetic", help="generate a Gaussian synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--inliers", type=int, default=500)
    p.add_argument("--outliers", type=int, default=150)
    p.add_argument("--min-tokens", type=int, default=16)
    p.add_argument("--max-tokens", type=int, default=64)
    p.add_argument("--shift", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="")
    p.set_defaults(func=cmd_make_synthetic)

    p = sub.add_parser("split", help="assemble a few-shot dataset manifest")
    p.add_argument("--inlier-archive", required=True)
    p.add_argument("--outlier-archive", action="append", required=True)
    p.add_argument("--outlier-labels", default=None, help="comma-separated class labels")
    p.add_argument("--outlier-count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train from a manifest and config file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", action="store_true", help="resume from the latest checkpoint")
    p.add_argument("--quiet", action="store_true", help="suppress per-batch log lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score documents with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--archive", default=None)
    p.add_argument("--label", type=int, default=None, help="label for a bare archive (0 or 1)")
    p.add_argument("--out", default=None, help="scores TSV path (stdout if omitted)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute AUROC/AUPRC for scores or a checkpoint")
    p.add_argument("--scores", default=None, help="scores TSV from the score command")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an experiment sweep from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--keep-checkpoints", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="dump archive/checkpoint/manifest headers")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--archive", default=None)
    group.add_argument("--checkpoint", default=None)
    group.add_argument("--manifest", default=None)
    p.add_argument("--full", action="store_true", help="also validate archive payloads")
    p.add_argument("--strict", action="store_true", help="exit non-zero on warnings")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DataFormatError, ShapeMismatchError, ConfigError, MetricUndefinedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
