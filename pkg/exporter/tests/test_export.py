"""Export pipeline and the cross-package acceptance check.

The smoke corpus has 20 documents in two classes. Exported archives must
validate through the detector's reader with zero warnings, and the detector
CLI must train end-to-end on the exported manifest. The detector is driven
as a subprocess: this package never imports it.
"""

import json
import subprocess
import sys

import pytest

from textad_export.cli import main as export_main
from textad_export.corpora import CorpusUnavailableError, load_corpus
from textad_export.export import ExportJob, export

BASEBALL = [
    "The pitcher threw a perfect fastball during the ninth inning.",
    "Our team won the pennant after a dramatic extra-innings game!",
    "He slid into second base and beat the throw by inches.",
    "The catcher signaled for a curveball low and away.",
    "Fans cheered as the shortstop turned an unassisted double play.",
    "A towering home run cleared the left field wall.",
    "The bullpen held the lead through the final three innings.",
    "Her batting average climbed above three hundred this season, remarkable!",
    "The umpire called a strike on the outside corner.",
    "Spring training opens with 40 players competing for roster spots.",
]

SPACE = [
    "The probe entered orbit around the outer planet after a decade.",
    "Engineers tested the rocket engine at full thrust yesterday.",
    "A solar flare disrupted radio communication with the station.",
    "The telescope captured images of a distant spiral galaxy.",
    "Astronauts completed a six-hour spacewalk to repair the antenna.",
    "The lander transmitted soil analysis from the crater floor.",
    "Mission control confirmed the satellite deployed both solar panels.",
    "A meteor shower peaks tonight with 60 streaks per hour.",
    "The capsule splashed down safely in the Pacific Ocean.",
    "Spectrometer readings suggest water ice beneath the surface dust.",
]


@pytest.fixture(scope="module")
def smoke_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    for label, docs in (("baseball", BASEBALL), ("space", SPACE)):
        class_dir = root / label
        class_dir.mkdir()
        for i, text in enumerate(docs):
            (class_dir / f"doc{i:02d}.txt").write_text(text)
    return root


@pytest.fixture(scope="module")
def exported(smoke_corpus, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("export")
    job = ExportJob(
        corpus="plain-text-dir",
        inlier_class="baseball",
        out_dir=str(out_dir),
        encoder_name="hashed-attn-24",
        max_sequence_length=32,
        data_dir=str(smoke_corpus),
    )
    return export(job)


def detector(*argv):
    return subprocess.run(
        [sys.executable, "-m", "textad.cli", *argv], capture_output=True, text=True
    )


class TestCorpusLoading:
    def test_plain_dir_grouping(self, smoke_corpus):
        docs = load_corpus("plain-text-dir", str(smoke_corpus))
        assert len(docs) == 20
        assert {d.class_label for d in docs} == {"baseball", "space"}
        assert docs[0].doc_id.startswith("baseball/")

    def test_missing_dir_gives_instructions(self):
        with pytest.raises(CorpusUnavailableError, match="--data-dir"):
            load_corpus("plain-text-dir", None)

    def test_reuters_gives_instructions(self):
        with pytest.raises(CorpusUnavailableError, match="plain-text-dir"):
            load_corpus("reuters", None)

    def test_agnews_needs_local_csv(self, tmp_path):
        with pytest.raises(CorpusUnavailableError, match="train.csv"):
            load_corpus("agnews", str(tmp_path))

    def test_agnews_local_csv_parses(self, tmp_path):
        (tmp_path / "train.csv").write_text(
            '"3","Market rally","Stocks climbed sharply today."\n'
            '"2","Final score","The home side won in extra time."\n'
        )
        docs = load_corpus("agnews", str(tmp_path))
        assert {d.class_label for d in docs} == {"business", "sports"}


class TestExportJob:
    def test_manifest_and_counts(self, exported):
        assert exported.document_counts == {"baseball": 10, "space": 10}
        assert exported.skipped == 0
        assert exported.dim == 24
        manifest = json.loads(open(exported.manifest_path).read())
        assert manifest["inliers"]["class_label"] == "baseball"
        assert [o["class_label"] for o in manifest["outliers"]] == ["space"]
        assert len(manifest["inliers"]["doc_ids"]) == 10
        assert manifest["metadata"]["encoder"] == "hashed-attn-24"
        assert manifest["metadata"]["encoder_dim"] == 24
        assert manifest["metadata"]["stopword_tooling"].startswith("scikit-learn==")

    def test_unknown_inlier_class_rejected(self, smoke_corpus, tmp_path):
        job = ExportJob(
            corpus="plain-text-dir",
            inlier_class="cricket",
            out_dir=str(tmp_path),
            data_dir=str(smoke_corpus),
        )
        with pytest.raises(ValueError, match="cricket"):
            export(job)

    def test_reexport_is_byte_identical(self, smoke_corpus, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out_dir = tmp_path / tag
            export(
                ExportJob(
                    corpus="plain-text-dir",
                    inlier_class="space",
                    out_dir=str(out_dir),
                    encoder_name="hashed-attn-16",
                    max_sequence_length=32,
                    data_dir=str(smoke_corpus),
                )
            )
            outs.append(out_dir)
        for name in ("baseball.emb", "space.emb", "manifest.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_empty_documents_are_skipped_with_log(self, tmp_path, caplog):
        corpus = tmp_path / "corpus"
        (corpus / "stuff").mkdir(parents=True)
        (corpus / "stuff" / "good.txt").write_text("rockets are loud machines")
        (corpus / "stuff" / "empty.txt").write_text("the 12345 !!!")
        (corpus / "other").mkdir()
        (corpus / "other" / "fine.txt").write_text("pitchers throw baseballs")
        result = export(
            ExportJob(
                corpus="plain-text-dir",
                inlier_class="stuff",
                out_dir=str(tmp_path / "out"),
                encoder_name="hashed-attn-8",
                data_dir=str(corpus),
            )
        )
        assert result.skipped == 1
        assert result.document_counts["stuff"] == 1

    def test_single_hello_world_document(self, tmp_path):
        corpus = tmp_path / "corpus"
        (corpus / "greetings").mkdir(parents=True)
        (corpus / "greetings" / "hi.txt").write_text("hello world")
        (corpus / "other").mkdir()
        (corpus / "other" / "bye.txt").write_text("farewell planet")
        result = export(
            ExportJob(
                corpus="plain-text-dir",
                inlier_class="greetings",
                out_dir=str(tmp_path / "out"),
                encoder_name="hashed-attn-12",
                data_dir=str(corpus),
            )
        )
        assert result.document_counts["greetings"] == 1
        assert result.dim == 12
        manifest = json.loads(open(result.manifest_path).read())
        assert manifest["inliers"]["doc_ids"] == ["greetings/hi"]

    def test_six_class_corpus_keeps_five_outlier_classes(self, tmp_path):
        corpus = tmp_path / "corpus"
        classes = ["computer", "recreation", "science", "miscellaneous", "politics", "religion"]
        for label in classes:
            (corpus / label).mkdir(parents=True)
            (corpus / label / "doc.txt").write_text(f"an article about {label} topics")
        result = export(
            ExportJob(
                corpus="plain-text-dir",
                inlier_class="computer",
                out_dir=str(tmp_path / "out"),
                encoder_name="hashed-attn-8",
                data_dir=str(corpus),
            )
        )
        manifest = json.loads(open(result.manifest_path).read())
        assert manifest["inliers"]["class_label"] == "computer"
        assert sorted(o["class_label"] for o in manifest["outliers"]) == sorted(
            c for c in classes if c != "computer"
        )

    def test_cli_smoke(self, smoke_corpus, tmp_path, capsys):
        rc = export_main(
            [
                "--corpus", "plain-text-dir", "--data-dir", str(smoke_corpus),
                "--inlier-class", "baseball", "--encoder", "hashed-attn-16",
                "--out-dir", str(tmp_path / "cliout"),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "baseball: 10 documents (inliers)" in out
        assert (tmp_path / "cliout" / "manifest.json").exists()


class TestDetectorAcceptance:
    def test_archives_validate_with_zero_warnings(self, exported):
        ok = True
        for label, path in exported.archive_paths.items():
            proc = detector("inspect", "--archive", path, "--full", "--strict")
            info = json.loads(proc.stdout)
            ok = ok and proc.returncode == 0 and info["warnings"] == []
            assert proc.returncode == 0, proc.stderr
            assert info["warnings"] == []
            assert info["dim"] == 24
        print(f"[{'PASS' if ok else 'FAIL'}] C12a exporter-roundtrip: "
              f"{len(exported.archive_paths)} archives, zero reader warnings")

    def test_smoke_corpus_trains_through_detector_cli(self, exported, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "attention_width": 12, "head_count": 2, "k_fraction": 0.1,
                    "learning_rate": 1e-4, "batch_size": 4, "epochs": 2, "seed": 5,
                    "prior": {"mean": 0.0, "std": 1.0, "sample_count": 64, "seed": 0},
                }
            )
        )
        run_dir = tmp_path / "run"
        proc = detector(
            "train", "--manifest", exported.manifest_path, "--config", str(config),
            "--out-dir", str(run_dir), "--quiet",
        )
        assert proc.returncode == 0, proc.stderr
        assert (run_dir / "epoch-00002.ckpt").exists()
        scores = tmp_path / "scores.tsv"
        proc = detector(
            "score", "--checkpoint", str(run_dir / "epoch-00002.ckpt"),
            "--manifest", exported.manifest_path, "--out", str(scores),
        )
        assert proc.returncode == 0, proc.stderr
        proc = detector("eval", "--scores", str(scores))
        assert proc.returncode == 0, proc.stderr
        report = json.loads(proc.stdout)
        assert report["count"] == 20
        print("[PASS] C12b exporter-end-to-end: 20-document smoke corpus trained, "
              f"scored, and evaluated through the detector CLI (auroc {report['auroc']:.3f})")
