"""Corpus loaders: documents grouped by class label.

``plain-text-dir`` works fully offline (one subdirectory per class, one
.txt file per document). The benchmark corpora need their upstream data and
raise a download-instruction error when it is missing.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

CORPORA = ("plain-text-dir", "newsgroups", "agnews", "reuters")

# 20Newsgroups topical-intrusion protocol: the six primary classes and the
# newsgroup labels grouped under each.
NEWSGROUP_CLASSES = {
    "computer": [
        "comp.graphics",
        "comp.os.ms-windows.misc",
        "comp.sys.ibm.pc.hardware",
        "comp.sys.mac.hardware",
        "comp.windows.x",
    ],
    "recreation": ["rec.autos", "rec.motorcycles", "rec.sport.baseball", "rec.sport.hockey"],
    "science": ["sci.crypt", "sci.electronics", "sci.med", "sci.space"],
    "miscellaneous": ["misc.forsale"],
    "politics": ["talk.politics.misc", "talk.politics.guns", "talk.politics.mideast"],
    "religion": ["talk.religion.misc", "alt.atheism", "soc.religion.christian"],
}

AGNEWS_CLASSES = {"1": "world", "2": "sports", "3": "business", "4": "sci"}


class CorpusUnavailableError(RuntimeError):
    """Raised with instructions when a corpus is not present locally."""


@dataclass
class CorpusDocument:
    doc_id: str
    text: str
    class_label: str


def load_corpus(corpus: str, data_dir: str | None, split: str = "train") -> list[CorpusDocument]:
    if corpus == "plain-text-dir":
        return _load_plain_dir(data_dir)
    if corpus == "newsgroups":
        return _load_newsgroups(data_dir, split)
    if corpus == "agnews":
        return _load_agnews(data_dir, split)
    if corpus == "reuters":
        raise CorpusUnavailableError(
            "Reuters-21578 SGML parsing is not bundled: extract the selected "
            "categories (earn, acq, crude, trade, money-fx, interest, ship) to "
            "one directory per category and export with --corpus plain-text-dir"
        )
    raise ValueError(f"unknown corpus {corpus!r}; expected one of {CORPORA}")


def _load_plain_dir(data_dir: str | None) -> list[CorpusDocument]:
    if not data_dir or not os.path.isdir(data_dir):
        raise CorpusUnavailableError(
            "plain-text-dir needs --data-dir pointing at a directory with one "
            "subdirectory per class label and one .txt file per document"
        )
    docs = []
    for label in sorted(os.listdir(data_dir)):
        class_dir = os.path.join(data_dir, label)
        if not os.path.isdir(class_dir):
            continue
        for name in sorted(os.listdir(class_dir)):
            if not name.endswith(".txt"):
                continue
            path = os.path.join(class_dir, name)
            with open(path, "r", encoding="utf-8", errors="replace") as fh:
                text = fh.read()
            docs.append(
                CorpusDocument(
                    doc_id=f"{label}/{os.path.splitext(name)[0]}",
                    text=text,
                    class_label=label,
                )
            )
    if not docs:
        raise CorpusUnavailableError(f"no class subdirectories with .txt files under {data_dir}")
    return docs


def _load_newsgroups(data_dir: str | None, split: str) -> list[CorpusDocument]:
    try:
        from sklearn.datasets import fetch_20newsgroups

        raw = fetch_20newsgroups(
            data_home=data_dir,
            subset="train" if split == "train" else "test",
            remove=("headers", "footers", "quotes"),
            download_if_missing=False,
        )
    except Exception as exc:
        raise CorpusUnavailableError(
            "20Newsgroups is not cached locally; on a machine with network "
            "access run sklearn.datasets.fetch_20newsgroups(data_home=...) and "
            "pass that directory as --data-dir"
        ) from exc
    by_group = {name: idx for idx, name in enumerate(raw.target_names)}
    docs = []
    for primary, groups in NEWSGROUP_CLASSES.items():
        wanted = {by_group[g] for g in groups if g in by_group}
        count = 0
        for text, target in zip(raw.data, raw.target):
            if target in wanted:
                docs.append(
                    CorpusDocument(
                        doc_id=f"{primary}/{split}-{count:06d}", text=text, class_label=primary
                    )
                )
                count += 1
    return docs


def _load_agnews(data_dir: str | None, split: str) -> list[CorpusDocument]:
    name = "train.csv" if split == "train" else "test.csv"
    path = os.path.join(data_dir or "", name)
    if not data_dir or not os.path.isfile(path):
        raise CorpusUnavailableError(
            f"AG News needs --data-dir containing {name} (class,title,description "
            "rows; the standard distribution of the corpus)"
        )
    docs = []
    counters: dict[str, int] = {}
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for row in csv.reader(fh):
            if len(row) < 3 or row[0] not in AGNEWS_CLASSES:
                continue
            label = AGNEWS_CLASSES[row[0]]
            idx = counters.get(label, 0)
            counters[label] = idx + 1
            docs.append(
                CorpusDocument(
                    doc_id=f"{label}/{split}-{idx:06d}",
                    text=" ".join(row[1:]),
                    class_label=label,
                )
            )
    if not docs:
        raise CorpusUnavailableError(f"{path} contained no AG News rows")
    return docs
