"""Synthetic prompt generation: topic, scenario, and context families.

Topic generation expands 16 seed topics into macro-topics and topics,
then asks for conversational prompts per node. Scenario generation
expands broad usage scenarios into detailed ones. Context generation
samples corpus documents and asks for prompts grounded in each text.
Half of each family is then revised for added length and complexity.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .client import ChatRequest, ChatResponse, TeacherClient
from .errors import CorpusUnavailable, EmptyCorpus, GenerationParseError, KakugoError
from .templates import (
    extract_improved_prompt,
    extract_string_list,
    load_seed_topics,
    load_template,
)
from .tokenizers import truncate_tokens
from .types import read_jsonl

logger = logging.getLogger(__name__)

SEED = "seed"
MACRO_TOPIC = "macro_topic"
TOPIC = "topic"
BROAD = "broad"
DETAILED = "detailed"

CONTEXT_TASKS = ("translate", "summarize", "improve", "classify", "answer_question")

# answer_question is up-weighted for retrieval-style usage of the
# trained model; the rest stay uniform.
DEFAULT_TASK_WEIGHTS: Dict[str, int] = {
    "translate": 1,
    "summarize": 1,
    "improve": 1,
    "classify": 1,
    "answer_question": 4,
}

_TASK_PHRASES = {
    "translate": "translate",
    "summarize": "summarize",
    "improve": "improve",
    "classify": "classify",
    "answer_question": "answer a question about",
}

_CONTEXT_JOIN = "\n\n"


@dataclass
class TopicNode:
    node_id: str
    text: str
    level: str  # seed | macro_topic | topic
    parent_id: Optional[str] = None
    language_specific: bool = False

    def to_json(self) -> dict:
        return {
            "node_id": self.node_id,
            "text": self.text,
            "level": self.level,
            "parent_id": self.parent_id,
            "language_specific": self.language_specific,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TopicNode":
        return cls(**obj)


@dataclass
class ScenarioNode:
    node_id: str
    text: str
    level: str  # broad | detailed
    parent_id: Optional[str] = None
    language_informed: bool = False

    def to_json(self) -> dict:
        return {
            "node_id": self.node_id,
            "text": self.text,
            "level": self.level,
            "parent_id": self.parent_id,
            "language_informed": self.language_informed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioNode":
        return cls(**obj)


@dataclass
class ContextSource:
    document_id: str
    truncated_text: str
    task: str

    def to_json(self) -> dict:
        return {"document_id": self.document_id, "truncated_text": self.truncated_text, "task": self.task}

    @classmethod
    def from_json(cls, obj: dict) -> "ContextSource":
        return cls(**obj)


@dataclass
class PromptRecord:
    prompt_text: str
    method: str  # topic | scenario | context
    lineage: str  # node_id or document_id of the originating pool entry
    revised: bool = False
    context_prefix: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")
        if (self.method == "context") != (self.context_prefix is not None):
            raise ValueError("context_prefix present iff method is context")

    def bare_prompt(self) -> str:
        """Prompt text without the prepended context prefix."""
        if self.context_prefix is None:
            return self.prompt_text
        return self.prompt_text[len(self.context_prefix) + len(_CONTEXT_JOIN):]

    def to_json(self) -> dict:
        return {
            "prompt_text": self.prompt_text,
            "method": self.method,
            "lineage": self.lineage,
            "revised": self.revised,
            "context_prefix": self.context_prefix,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PromptRecord":
        return cls(**obj)


@dataclass
class GenerationSettings:
    """Per-stage counts; defaults are the pipeline's standard values."""

    model_id: str = "gpt-oss-120b"
    temperature: float = 1.0
    macro_topics_per_seed: int = 20
    topics_per_macro: int = 10
    prompts_per_topic: int = 3
    min_prompts: int = 1
    broad_scenarios: int = 30
    detailed_per_broad: int = 30
    prompts_per_scenario: int = 5
    context_cap: int = 10000
    context_prefix_tokens: int = 1000
    prompts_per_context: int = 3
    task_weights: Dict[str, int] = field(default_factory=lambda: dict(DEFAULT_TASK_WEIGHTS))
    max_in_flight: int = 8
    parse_retries: int = 2
    resource_dir: Optional[Path] = None


def draw_task(rng: random.Random, weights: Optional[Dict[str, int]] = None) -> str:
    """Draw one context task according to the configured weights."""
    weights = weights or DEFAULT_TASK_WEIGHTS
    tasks = list(weights)
    return rng.choices(tasks, weights=[weights[t] for t in tasks], k=1)[0]


class PromptGenerator:
    def __init__(self, client: TeacherClient, settings: Optional[GenerationSettings] = None):
        self.client = client
        self.settings = settings or GenerationSettings()
        self.drop_counts: Dict[str, int] = {}

    # -- teacher plumbing -------------------------------------------------

    def _template(self, name: str) -> str:
        return load_template(name, self.settings.resource_dir)

    def _request(self, system: str, user: str) -> ChatRequest:
        return ChatRequest.build(
            model_id=self.settings.model_id,
            messages=[("system", system), ("user", user)],
            temperature=self.settings.temperature,
        )

    def _batch_lists(self, requests: Sequence[ChatRequest], stage: str) -> List[Optional[List[str]]]:
        """Fetch and parse a string list per request; None marks a give-up.

        Parse failures are retried with a fresh (cache-bypassing) call,
        since re-reading a cached malformed response cannot succeed.
        """
        results: List[Optional[List[str]]] = [None] * len(requests)
        pending = list(range(len(requests)))
        for round_no in range(self.settings.parse_retries + 1):
            if not pending:
                break
            responses = self.client.complete_batch(
                [requests[i] for i in pending],
                max_in_flight=self.settings.max_in_flight,
                refresh=round_no > 0,
            )
            still_pending: List[int] = []
            for slot, response in zip(pending, responses):
                if isinstance(response, KakugoError):
                    still_pending.append(slot)
                    continue
                try:
                    results[slot] = extract_string_list(response.final_text)
                except GenerationParseError:
                    still_pending.append(slot)
            pending = still_pending
        if pending:
            logger.warning("%s: %d requests unparseable after retries", stage, len(pending))
            self.drop_counts[stage] = self.drop_counts.get(stage, 0) + len(pending)
        return results

    # -- topics -----------------------------------------------------------

    def expand_topics(self, language_name: str) -> List[TopicNode]:
        """Seeds -> macro-topics -> topics; returns the combined pool."""
        s = self.settings
        seeds = load_seed_topics(language_name, s.resource_dir)
        n_general = len(seeds) // 2
        nodes = [
            TopicNode(node_id=f"seed/{i}", text=text, level=SEED, language_specific=i >= n_general)
            for i, text in enumerate(seeds)
        ]
        macro_nodes = self._expand_level(nodes, language_name, s.macro_topics_per_seed, MACRO_TOPIC)
        topic_nodes = self._expand_level(macro_nodes, language_name, s.topics_per_macro, TOPIC)
        return nodes + macro_nodes + topic_nodes

    def _expand_level(
        self, parents: List[TopicNode], language_name: str, count: int, level: str
    ) -> List[TopicNode]:
        template = self._template("topic_generation_input.txt")
        system = self._template("list_generation_system.txt")
        requests = [
            self._request(system, template.format(num_topics=count, macrotopic=p.text, lang_name=language_name))
            for p in parents
        ]
        out: List[TopicNode] = []
        for parent, items in zip(parents, self._batch_lists(requests, f"expand_{level}")):
            if not items:
                continue
            for j, text in enumerate(items[:count]):
                out.append(
                    TopicNode(
                        node_id=f"{parent.node_id}/{level[0]}{j}",
                        text=text,
                        level=level,
                        parent_id=parent.node_id,
                        language_specific=parent.language_specific,
                    )
                )
        return out

    def generate_topic_prompts(self, pool: Sequence[TopicNode], language_name: str) -> List[PromptRecord]:
        s = self.settings
        template = self._template("topic_prompt_input.txt")
        system = self._template("prompt_generation_system.txt").format(lang_name=language_name)
        requests = [
            self._request(
                system,
                template.format(
                    min_prompts=s.min_prompts,
                    num_prompts=s.prompts_per_topic,
                    lang_name=language_name,
                    topic=node.text,
                ),
            )
            for node in pool
        ]
        records: List[PromptRecord] = []
        for node, items in zip(pool, self._batch_lists(requests, "topic_prompts")):
            if not items:
                continue
            for text in items[: s.prompts_per_topic]:
                records.append(PromptRecord(prompt_text=text, method="topic", lineage=node.node_id))
        return _dedup(records)

    # -- scenarios --------------------------------------------------------

    def expand_scenarios(self, language_name: str) -> List[ScenarioNode]:
        """Broad scenarios (language-informed and agnostic) plus details."""
        s = self.settings
        system = self._template("list_generation_system.txt")
        broad_requests = [
            self._request(
                system,
                self._template("scenario_broad_input.txt").format(
                    num_scenarios=s.broad_scenarios, lang_name=language_name
                ),
            ),
            self._request(
                system,
                self._template("scenario_broad_agnostic_input.txt").format(num_scenarios=s.broad_scenarios),
            ),
        ]
        broad: List[ScenarioNode] = []
        for informed, items in zip((True, False), self._batch_lists(broad_requests, "expand_broad")):
            if not items:
                continue
            tag = "informed" if informed else "agnostic"
            for j, text in enumerate(items[: s.broad_scenarios]):
                broad.append(
                    ScenarioNode(
                        node_id=f"broad/{tag}/{j}",
                        text=text,
                        level=BROAD,
                        language_informed=informed,
                    )
                )
        detailed_template = self._template("scenario_detailed_input.txt")
        detailed_requests = [
            self._request(
                system,
                detailed_template.format(
                    num_scenarios=s.detailed_per_broad,
                    general_scenario=node.text,
                    lang_name=language_name,
                ),
            )
            for node in broad
        ]
        detailed: List[ScenarioNode] = []
        for parent, items in zip(broad, self._batch_lists(detailed_requests, "expand_detailed")):
            if not items:
                continue
            for j, text in enumerate(items[: s.detailed_per_broad]):
                detailed.append(
                    ScenarioNode(
                        node_id=f"{parent.node_id}/d{j}",
                        text=text,
                        level=DETAILED,
                        parent_id=parent.node_id,
                        language_informed=parent.language_informed,
                    )
                )
        return broad + detailed

    def generate_scenario_prompts(
        self, pool: Sequence[ScenarioNode], language_name: str
    ) -> List[PromptRecord]:
        s = self.settings
        template = self._template("scenario_prompt_input.txt")
        system = self._template("prompt_generation_system.txt").format(lang_name=language_name)
        requests = [
            self._request(
                system,
                template.format(
                    n_prompts=s.prompts_per_scenario, lang_name=language_name, scenario=node.text
                ),
            )
            for node in pool
        ]
        records: List[PromptRecord] = []
        for node, items in zip(pool, self._batch_lists(requests, "scenario_prompts")):
            if not items:
                continue
            for text in items[: s.prompts_per_scenario]:
                records.append(PromptRecord(prompt_text=text, method="scenario", lineage=node.node_id))
        return _dedup(records)

    # -- contexts ---------------------------------------------------------

    def sample_context_sources(
        self, corpus_path: Path, language_code: str, rng_seed: int
    ) -> List[ContextSource]:
        """Sample corpus documents and assign each a weighted task."""
        s = self.settings
        corpus_path = Path(corpus_path)
        if not corpus_path.exists():
            raise CorpusUnavailable(f"corpus not found: {corpus_path}")
        docs: List[Tuple[str, str]] = []
        for i, row in enumerate(read_jsonl(corpus_path)):
            if str(row.get("language", "")).lower() != language_code.lower():
                continue
            text = row.get("text", "")
            if text:
                docs.append((str(row.get("id", i)), text))
        if not docs:
            raise EmptyCorpus(f"no documents for language {language_code!r} in {corpus_path}")
        rng = random.Random(rng_seed)
        if len(docs) > s.context_cap:
            docs = rng.sample(docs, s.context_cap)
        sources = []
        for doc_id, text in docs:
            sources.append(
                ContextSource(
                    document_id=doc_id,
                    truncated_text=truncate_tokens(text, s.context_prefix_tokens),
                    task=draw_task(rng, s.task_weights),
                )
            )
        return sources

    def generate_context_prompts(
        self, sources: Sequence[ContextSource], language_name: str
    ) -> List[PromptRecord]:
        s = self.settings
        template = self._template("context_prompt_input.txt")
        system = self._template("prompt_generation_system.txt").format(lang_name=language_name)
        requests = [
            self._request(
                system,
                template.format(
                    num_prompts=s.prompts_per_context,
                    lang_name=language_name,
                    context_text=source.truncated_text,
                    prompt_type=_TASK_PHRASES[source.task],
                ),
            )
            for source in sources
        ]
        records: List[PromptRecord] = []
        for source, items in zip(sources, self._batch_lists(requests, "context_prompts")):
            if not items:
                continue
            for text in items[: s.prompts_per_context]:
                records.append(
                    PromptRecord(
                        prompt_text=source.truncated_text + _CONTEXT_JOIN + text,
                        method="context",
                        lineage=source.document_id,
                        context_prefix=source.truncated_text,
                    )
                )
        return _dedup(records)

    # -- revision ---------------------------------------------------------

    def revise_prompts(
        self, records: List[PromptRecord], rng_seed: int, language_name: str
    ) -> List[PromptRecord]:
        """Revise floor(n/2) of each method family in place.

        Failed revisions keep the original prompt with revised=False.
        Output cardinality and ordering always match the input.
        """
        rng = random.Random(rng_seed)
        out = list(records)
        selected: List[int] = []
        for method in ("topic", "scenario", "context"):
            family = [i for i, r in enumerate(out) if r.method == method]
            if family:
                selected.extend(sorted(rng.sample(family, len(family) // 2)))
        if not selected:
            return out
        system = self._template("revision_system.txt").format(lang_name=language_name)
        requests = [self._request(system, out[i].bare_prompt()) for i in selected]
        responses = self._batch_revisions(requests)
        for i, improved in zip(selected, responses):
            if improved is None:
                continue
            record = out[i]
            if record.method == "context":
                prompt_text = record.context_prefix + _CONTEXT_JOIN + improved
            else:
                prompt_text = improved
            out[i] = PromptRecord(
                prompt_text=prompt_text,
                method=record.method,
                lineage=record.lineage,
                revised=True,
                context_prefix=record.context_prefix,
            )
        return out

    def _batch_revisions(self, requests: Sequence[ChatRequest]) -> List[Optional[str]]:
        results: List[Optional[str]] = [None] * len(requests)
        pending = list(range(len(requests)))
        for round_no in range(self.settings.parse_retries + 1):
            if not pending:
                break
            responses = self.client.complete_batch(
                [requests[i] for i in pending],
                max_in_flight=self.settings.max_in_flight,
                refresh=round_no > 0,
            )
            still_pending: List[int] = []
            for slot, response in zip(pending, responses):
                if isinstance(response, KakugoError):
                    still_pending.append(slot)
                    continue
                try:
                    results[slot] = extract_improved_prompt(response.final_text)
                except GenerationParseError:
                    still_pending.append(slot)
            pending = still_pending
        if pending:
            self.drop_counts["revision"] = self.drop_counts.get("revision", 0) + len(pending)
        return results


def _dedup(records: List[PromptRecord]) -> List[PromptRecord]:
    """Exact-string dedup within one family, keeping first occurrences."""
    seen = set()
    out = []
    for record in records:
        if record.prompt_text in seen:
            continue
        seen.add(record.prompt_text)
        out.append(record)
    return out
