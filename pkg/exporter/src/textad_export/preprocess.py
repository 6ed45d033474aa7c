"""Text preprocessing: lowercase, strip punctuation and digits, drop stopwords.

The stopword list is scikit-learn's frozen English list; the sklearn
version is recorded in every manifest so the exact list is pinned by the
tooling version.
"""

from __future__ import annotations

import re

import sklearn
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

_STRIP = re.compile(r"[^a-z\s]+")
_WS = re.compile(r"\s+")


def stopword_tooling() -> str:
    return f"scikit-learn=={sklearn.__version__}"


def preprocess(text: str) -> list[str]:
    """Lowercased alphabetic tokens with English stopwords removed.

    Punctuation marks and digits are deleted (not turned into spaces), so
    "e-mail" becomes "email" and "42nd" collapses into "nd"; whitespace is
    the only token separator. May return an empty list.
    """
    lowered = text.lower()
    cleaned = _STRIP.sub("", lowered)
    tokens = [t for t in _WS.split(cleaned) if t]
    return [t for t in tokens if t not in ENGLISH_STOP_WORDS]
