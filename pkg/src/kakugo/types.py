"""Shared training-example record types and JSONL checkpoint helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Tuple

GENERATED = "generated"
TRANSLATED = "translated"
THINKING = "thinking"
STANDARD = "standard"


@dataclass
class ConversationExample:
    """One training example: ordered turns plus provenance.

    Generated examples carry the teacher's reasoning trace and train in
    thinking mode; translated examples train in standard mode and never
    carry a trace. ``method`` records which prompt family produced a
    generated example (topic/scenario/context).
    """

    turns: List[Tuple[str, str]]
    origin: str
    source_id: str
    system_mode: str = STANDARD
    reasoning_trace: Optional[str] = None
    method: Optional[str] = None

    def __post_init__(self) -> None:
        if self.origin not in (GENERATED, TRANSLATED):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.system_mode not in (THINKING, STANDARD):
            raise ValueError(f"unknown system_mode {self.system_mode!r}")
        if self.origin == GENERATED and self.system_mode != THINKING:
            raise ValueError("generated examples must use thinking mode")
        if self.origin == TRANSLATED:
            if self.system_mode != STANDARD:
                raise ValueError("translated examples must use standard mode")
            if self.reasoning_trace is not None:
                raise ValueError("translated examples carry no reasoning trace")
        for i, (role, _content) in enumerate(self.turns):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(f"turn {i} has role {role!r}, expected {expected!r}")

    def content_tokens(self, counter, include_reasoning: bool = False) -> int:
        total = sum(counter(content) for _role, content in self.turns)
        if include_reasoning and self.reasoning_trace:
            total += counter(self.reasoning_trace)
        return total

    def to_json(self) -> dict:
        return {
            "turns": [[role, content] for role, content in self.turns],
            "origin": self.origin,
            "source_id": self.source_id,
            "system_mode": self.system_mode,
            "reasoning_trace": self.reasoning_trace,
            "method": self.method,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConversationExample":
        return cls(
            turns=[(role, content) for role, content in obj["turns"]],
            origin=obj["origin"],
            source_id=obj["source_id"],
            system_mode=obj.get("system_mode", STANDARD),
            reasoning_trace=obj.get("reasoning_trace"),
            method=obj.get("method"),
        )


def write_jsonl(path: Path, records: Iterable[dict]) -> int:
    """Write records atomically (tmp file + rename). Returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    count = 0
    with tmp.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    tmp.replace(path)
    return count


def read_jsonl(path: Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
