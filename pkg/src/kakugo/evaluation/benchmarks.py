"""Benchmark ingestion: normalize locally stored rows to EvalItems.

Each benchmark is read from a line-delimited JSON file produced by a
small download/ingestion step; the loaders here only normalize columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from ..errors import DataUnavailable, SchemaError
from ..types import read_jsonl

MULTIPLE_CHOICE = "multiple_choice"
CLASSIFICATION = "classification"
TRANSLATION = "translation"

TASK_KIND = {
    "belebele": MULTIPLE_CHOICE,
    "global_mmlu": MULTIPLE_CHOICE,
    "sib200": CLASSIFICATION,
    "flores_xx_en": TRANSLATION,
    "flores_en_xx": TRANSLATION,
}

SIB200_CATEGORIES = (
    "science/technology",
    "travel",
    "politics",
    "sports",
    "health",
    "entertainment",
    "geography",
)

_LETTERS = "ABCDEFGHIJ"


@dataclass(frozen=True)
class EvalTask:
    benchmark: str
    language_code: str

    @property
    def task_kind(self) -> str:
        try:
            return TASK_KIND[self.benchmark]
        except KeyError:
            raise ValueError(f"unknown benchmark {self.benchmark!r}")


@dataclass
class EvalItem:
    item_id: str
    question_or_source: str
    gold: str
    context: Optional[str] = None
    choices: List[Tuple[str, str]] = field(default_factory=list)  # (label, option text)

    def __post_init__(self) -> None:
        if self.choices:
            labels = [label for label, _ in self.choices]
            if self.gold not in labels:
                raise SchemaError(f"gold {self.gold!r} not among labels {labels} for {self.item_id}")


def load_benchmark(benchmark: str, language_code: str, data_path: Path) -> List[EvalItem]:
    """Read one benchmark file and normalize rows in canonical order."""
    data_path = Path(data_path)
    if not data_path.exists():
        raise DataUnavailable(f"benchmark file not found: {data_path}")
    rows = list(read_jsonl(data_path))
    if not rows:
        raise DataUnavailable(f"benchmark file is empty: {data_path}")
    normalizer = {
        "belebele": _normalize_belebele,
        "global_mmlu": _normalize_global_mmlu,
        "sib200": _normalize_sib200,
        "flores_xx_en": _normalize_flores,
        "flores_en_xx": _normalize_flores,
    }.get(benchmark)
    if normalizer is None:
        raise ValueError(f"unknown benchmark {benchmark!r}")
    items = []
    for i, row in enumerate(rows):
        try:
            items.append(normalizer(row, i))
        except KeyError as exc:
            raise SchemaError(f"{benchmark} row {i} lacks field {exc}")
    return items


def _normalize_belebele(row: dict, index: int) -> EvalItem:
    choices = [(_LETTERS[j], row[f"mc_answer{j + 1}"]) for j in range(4)]
    gold = _LETTERS[int(row["correct_answer_num"]) - 1]
    return EvalItem(
        item_id=str(row.get("id", index)),
        context=row["flores_passage"],
        question_or_source=row["question"],
        choices=choices,
        gold=gold,
    )


def _normalize_global_mmlu(row: dict, index: int) -> EvalItem:
    choices = [(_LETTERS[j], row[f"option_{letter}"]) for j, letter in enumerate("abcd")]
    return EvalItem(
        item_id=str(row.get("id", index)),
        question_or_source=row["question"],
        choices=choices,
        gold=str(row["answer"]).strip().upper(),
    )


def _normalize_sib200(row: dict, index: int) -> EvalItem:
    choices = [(_LETTERS[j], category) for j, category in enumerate(SIB200_CATEGORIES)]
    category = row["category"]
    try:
        gold = _LETTERS[SIB200_CATEGORIES.index(category)]
    except ValueError:
        raise SchemaError(f"unknown sib200 category {category!r}")
    return EvalItem(
        item_id=str(row.get("id", index)),
        question_or_source=row["text"],
        choices=choices,
        gold=gold,
    )


def _normalize_flores(row: dict, index: int) -> EvalItem:
    return EvalItem(
        item_id=str(row.get("id", index)),
        question_or_source=row["source"],
        gold=row["target"],
    )
