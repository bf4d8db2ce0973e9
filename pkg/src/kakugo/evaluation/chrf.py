"""chrF++ translation metric, built from n-gram counts up.

Character n-grams are taken over the text with whitespace removed; word
n-grams over whitespace tokens with leading/trailing punctuation split
off. The score is the mean F_beta over all populated n-gram orders,
scaled to 0-100. Corpus scores aggregate raw statistics, not averages
of sentence scores.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

_WHITESPACE_RE = re.compile(r"\s+")
_PUNCTUATION = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


@dataclass(frozen=True)
class ChrfParams:
    char_ngram_max: int = 6
    word_ngram_max: int = 2
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.char_ngram_max <= 0 or self.word_ngram_max <= 0 or self.beta <= 0:
            raise ValueError("chrF parameters must be positive")

    @property
    def total_orders(self) -> int:
        return self.char_ngram_max + self.word_ngram_max


def _split_punctuation(token: str) -> List[str]:
    if len(token) <= 1:
        return [token]
    if token[-1] in _PUNCTUATION:
        return [token[:-1], token[-1]]
    if token[0] in _PUNCTUATION:
        return [token[0], token[1:]]
    return [token]


def word_tokens(text: str) -> List[str]:
    out: List[str] = []
    for token in text.strip().split():
        out.extend(_split_punctuation(token))
    return out


def _ngram_counters(units: Sequence, max_order: int) -> List[Counter]:
    counters = []
    for n in range(1, max_order + 1):
        counters.append(Counter(tuple(units[i : i + n]) for i in range(len(units) - n + 1)))
    return counters


# One statistics row per order: (hyp_total, ref_total, match_count).
Stats = List[Tuple[int, int, int]]


def pair_stats(hypothesis: str, reference: str, params: ChrfParams) -> Stats:
    hyp_chars = list(_WHITESPACE_RE.sub("", hypothesis))
    ref_chars = list(_WHITESPACE_RE.sub("", reference))
    hyp_words = word_tokens(hypothesis)
    ref_words = word_tokens(reference)
    stats: Stats = []
    for hyp_counters, ref_counters in (
        (_ngram_counters(hyp_chars, params.char_ngram_max), _ngram_counters(ref_chars, params.char_ngram_max)),
        (_ngram_counters(hyp_words, params.word_ngram_max), _ngram_counters(ref_words, params.word_ngram_max)),
    ):
        for hyp_counter, ref_counter in zip(hyp_counters, ref_counters):
            match = sum(min(count, ref_counter[ngram]) for ngram, count in hyp_counter.items())
            stats.append((sum(hyp_counter.values()), sum(ref_counter.values()), match))
    return stats


def score_from_stats(stats: Stats, beta: float) -> float:
    """F_beta averaged over orders where either side has any n-grams."""
    factor = beta * beta
    total = 0.0
    effective_orders = 0
    for hyp_total, ref_total, match in stats:
        if hyp_total == 0 and ref_total == 0:
            continue
        effective_orders += 1
        precision = match / hyp_total if hyp_total else 0.0
        recall = match / ref_total if ref_total else 0.0
        denominator = factor * precision + recall
        if denominator > 0:
            total += (1 + factor) * precision * recall / denominator
    if effective_orders == 0:
        return 0.0
    return 100.0 * total / effective_orders


def _add_stats(accumulator: Stats, stats: Stats) -> None:
    for i, row in enumerate(stats):
        acc = accumulator[i]
        accumulator[i] = (acc[0] + row[0], acc[1] + row[1], acc[2] + row[2])


def chrf_pp(hypothesis: str, references: Sequence[str], params: ChrfParams = ChrfParams()) -> float:
    """Sentence-level score against the best-matching reference."""
    if not references:
        raise ValueError("references must be non-empty")
    return max(
        score_from_stats(pair_stats(hypothesis, reference, params), params.beta)
        for reference in references
    )


def corpus_chrf_pp(
    hypotheses: Sequence[str],
    references: Sequence[Sequence[str]],
    params: ChrfParams = ChrfParams(),
) -> float:
    """Corpus score from statistics aggregated over all segments.

    With multiple references per segment, the reference with the best
    sentence-level score contributes its statistics.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references must align")
    if not hypotheses:
        raise ValueError("cannot score an empty corpus")
    totals: Stats = [(0, 0, 0)] * params.total_orders
    for hypothesis, refs in zip(hypotheses, references):
        if not refs:
            raise ValueError("every segment needs at least one reference")
        best = max(
            (pair_stats(hypothesis, reference, params) for reference in refs),
            key=lambda stats: score_from_stats(stats, params.beta),
        )
        _add_stats(totals, best)
    return score_from_stats(totals, params.beta)
