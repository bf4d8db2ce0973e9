"""Pluggable token counting.

The default counter splits on word characters and single punctuation marks.
Budget comparisons only need internal consistency, so any counter can be
swapped in as long as the same one is used across a run.
"""

from __future__ import annotations

import re
from typing import Callable, List

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def simple_tokenize(text: str) -> List[str]:
    """Split into word tokens and individual punctuation marks."""
    return _TOKEN_RE.findall(text)


def simple_count(text: str) -> int:
    return len(simple_tokenize(text))


def truncate_tokens(text: str, max_tokens: int) -> str:
    """Return the prefix of ``text`` covering its first ``max_tokens`` tokens."""
    if max_tokens <= 0:
        return ""
    matches = list(_TOKEN_RE.finditer(text))
    if len(matches) <= max_tokens:
        return text
    end = matches[max_tokens - 1].end()
    return text[:end]


TokenCounter = Callable[[str], int]

_COUNTERS: dict[str, TokenCounter] = {
    "simple": simple_count,
    "whitespace": lambda text: len(text.split()),
}


def get_counter(name: str) -> TokenCounter:
    try:
        return _COUNTERS[name]
    except KeyError:
        raise KeyError(f"unknown token counter {name!r}; known: {sorted(_COUNTERS)}")


def register_counter(name: str, counter: TokenCounter) -> None:
    _COUNTERS[name] = counter
