"""Corpus-to-archive exporter for the text anomaly detector.

Turns raw text corpora into token-level embedding archives plus a dataset
manifest, using a frozen sentence encoder. Writes the detector's file
formats without importing the detector.
"""

from .archive_writer import write_archive
from .corpora import CorpusDocument, CorpusUnavailableError, load_corpus
from .encoders import EncoderUnavailableError, HashedAttentionEncoder, load_encoder
from .export import ExportJob, ExportResult, export
from .preprocess import preprocess, stopword_tooling

__version__ = "0.1.0"

__all__ = [
    "CorpusDocument",
    "CorpusUnavailableError",
    "EncoderUnavailableError",
    "ExportJob",
    "ExportResult",
    "HashedAttentionEncoder",
    "export",
    "load_corpus",
    "load_encoder",
    "preprocess",
    "stopword_tooling",
    "write_archive",
]
