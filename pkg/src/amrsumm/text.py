"""Tokenization and small word-list resources."""
from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

_PUNCT_RE = re.compile(r"[^\w\s]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT_RE.sub(" ", text.lower()).split()


def read_word_list(path: str | Path) -> frozenset[str]:
    """One lowercased term per line; blank lines and ``#`` comments ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    with resources.as_file(resources.files("amrsumm") / "data" / "stopwords.txt") as p:
        return read_word_list(p)
