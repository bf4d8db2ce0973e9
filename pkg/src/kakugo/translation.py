"""Instruction-corpus translation with structural and length filtering.

Conversations are sent to the teacher serialized as a list of
{"from": ..., "value": ...} records; the translated output must parse
back with identical arity and role sequence or the conversation is
dropped. Survivors are filtered on the translated/source token ratio,
asymmetric to accommodate high token fertility in rare scripts.
"""

from __future__ import annotations

import ast
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .client import ChatRequest, TeacherClient
from .errors import CorpusUnavailable, KakugoError
from .prompts import GenerationSettings
from .templates import load_template
from .tokenizers import TokenCounter, simple_count
from .types import STANDARD, TRANSLATED, ConversationExample, read_jsonl

logger = logging.getLogger(__name__)

RATIO_MIN = 0.75
RATIO_MAX = 25.0

_ROLE_FOR = {"human": "user", "gpt": "assistant"}
_FROM_FOR = {"user": "human", "assistant": "gpt"}


@dataclass
class SourceConversation:
    conversation_id: str
    turns: List[Tuple[str, str]]  # (role, content), alternating from user
    source_language: str = "en"

    def __post_init__(self) -> None:
        for i, (role, content) in enumerate(self.turns):
            expected = "user" if i % 2 == 0 else "assistant"
            if role != expected:
                raise ValueError(f"turn {i} has role {role!r}, expected {expected!r}")
            if not content:
                raise ValueError(f"turn {i} has empty content")


@dataclass
class TranslatedConversation:
    conversation_id: str
    turns: List[Tuple[str, str]]
    token_ratio: float


@dataclass
class ParseFailure:
    conversation_id: str
    reason: str


@dataclass
class TranslationStats:
    loaded: int = 0
    kept: int = 0
    parse_failures: int = 0
    ratio_filtered: int = 0
    transport_drops: int = 0

    def conserved(self) -> bool:
        return self.loaded == self.kept + self.parse_failures + self.ratio_filtered + self.transport_drops


def default_english_predicate(language: str) -> bool:
    return language.strip().lower() in ("en", "eng", "english")


def load_source(
    corpus_path: Path,
    limit: int = 15000,
    is_english: Callable[[str], bool] = default_english_predicate,
) -> List[SourceConversation]:
    """First ``limit`` English conversations, in corpus order."""
    corpus_path = Path(corpus_path)
    if not corpus_path.exists():
        raise CorpusUnavailable(f"corpus not found: {corpus_path}")
    out: List[SourceConversation] = []
    for i, row in enumerate(read_jsonl(corpus_path)):
        if len(out) >= limit:
            break
        if not is_english(str(row.get("language", ""))):
            continue
        turns = []
        ok = True
        for turn in row.get("conversations", []):
            role = _ROLE_FOR.get(turn.get("from"))
            value = turn.get("value", "")
            if role is None or not value:
                ok = False
                break
            turns.append((role, value))
        if not ok or not turns or turns[0][0] != "user":
            continue
        try:
            out.append(
                SourceConversation(
                    conversation_id=str(row.get("id", i)),
                    turns=turns,
                    source_language=str(row.get("language", "en")),
                )
            )
        except ValueError:
            continue
    return out


def serialize_conversation(turns: Sequence[Tuple[str, str]]) -> str:
    return json.dumps(
        [{"from": _FROM_FOR[role], "value": content} for role, content in turns],
        ensure_ascii=False,
    )


def parse_translated(text: str, source: SourceConversation) -> Union[List[Tuple[str, str]], ParseFailure]:
    """Parse teacher output back into turns, enforcing the round-trip contract.

    Accepts JSON or Python-literal list syntax; requires the same number
    of records, the same role sequence, and the same keys as the source.
    """
    start = text.find("[")
    end = text.rfind("]")
    if start == -1 or end == -1 or end <= start:
        return ParseFailure(source.conversation_id, "no list structure in output")
    snippet = text[start : end + 1]
    parsed = None
    for loader in (json.loads, ast.literal_eval):
        try:
            parsed = loader(snippet)
            break
        except (ValueError, SyntaxError):
            continue
    if not isinstance(parsed, list):
        return ParseFailure(source.conversation_id, "output is not a list of records")
    if len(parsed) != len(source.turns):
        return ParseFailure(source.conversation_id, "turn count mismatch")
    turns: List[Tuple[str, str]] = []
    for record, (role, _content) in zip(parsed, source.turns):
        if not isinstance(record, dict) or set(record.keys()) != {"from", "value"}:
            return ParseFailure(source.conversation_id, "record keys changed")
        if record["from"] != _FROM_FOR[role]:
            return ParseFailure(source.conversation_id, "role sequence changed")
        value = record["value"]
        if not isinstance(value, str) or not value.strip():
            return ParseFailure(source.conversation_id, "empty translated turn")
        turns.append((role, value))
    return turns


class TranslationPipeline:
    def __init__(
        self,
        client: TeacherClient,
        settings: Optional[GenerationSettings] = None,
        counter: TokenCounter = simple_count,
    ):
        self.client = client
        self.settings = settings or GenerationSettings()
        self.counter = counter
        self.stats = TranslationStats()

    def translate_conversation(
        self, source: SourceConversation, language_name: str
    ) -> Union[TranslatedConversation, ParseFailure]:
        results = self.translate_batch([source], language_name)
        result = results[0]
        if isinstance(result, KakugoError):
            return ParseFailure(source.conversation_id, str(result))
        return result

    def translate_batch(
        self, sources: Sequence[SourceConversation], language_name: str
    ) -> List[Union[TranslatedConversation, ParseFailure, KakugoError]]:
        s = self.settings
        system = load_template("translation_system.txt", s.resource_dir).format(lang_name=language_name)
        requests = [
            ChatRequest.build(
                model_id=s.model_id,
                messages=[("system", system), ("user", serialize_conversation(src.turns))],
                temperature=s.temperature,
            )
            for src in sources
        ]
        responses = self.client.complete_batch(requests, max_in_flight=s.max_in_flight)
        out: List[Union[TranslatedConversation, ParseFailure, KakugoError]] = []
        for source, response in zip(sources, responses):
            if isinstance(response, KakugoError):
                out.append(response)
                continue
            turns = parse_translated(response.final_text, source)
            if isinstance(turns, ParseFailure):
                out.append(turns)
                continue
            source_tokens = sum(self.counter(c) for _r, c in source.turns)
            translated_tokens = sum(self.counter(c) for _r, c in turns)
            ratio = translated_tokens / source_tokens if source_tokens else float("inf")
            out.append(
                TranslatedConversation(
                    conversation_id=source.conversation_id, turns=turns, token_ratio=ratio
                )
            )
        return out

    def run(
        self, sources: Sequence[SourceConversation], language_name: str
    ) -> List[ConversationExample]:
        """Translate, filter, and emit training examples.

        Maintains the conservation identity
        loaded = kept + parse_failures + ratio_filtered + transport_drops.
        """
        self.stats.loaded += len(sources)
        candidates: List[TranslatedConversation] = []
        for result in self.translate_batch(sources, language_name):
            if isinstance(result, KakugoError):
                self.stats.transport_drops += 1
            elif isinstance(result, ParseFailure):
                self.stats.parse_failures += 1
            else:
                candidates.append(result)
        kept = filter_by_ratio(candidates)
        self.stats.ratio_filtered += len(candidates) - len(kept)
        self.stats.kept += len(kept)
        return [
            ConversationExample(
                turns=conv.turns,
                origin=TRANSLATED,
                system_mode=STANDARD,
                source_id=f"translated/{conv.conversation_id}",
            )
            for conv in kept
        ]


def filter_by_ratio(
    candidates: Sequence[TranslatedConversation],
    low: float = RATIO_MIN,
    high: float = RATIO_MAX,
) -> List[TranslatedConversation]:
    """Keep conversations with low <= token_ratio <= high, in order.

    Both boundaries are inclusive: only strictly-below-75% and
    strictly-above-25x translations are rejected.
    """
    return [c for c in candidates if low <= c.token_ratio <= high]
