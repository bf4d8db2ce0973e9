"""Few-shot evaluation protocol: prompt building, decoding, scoring.

The first three benchmark items become the few-shot exemplars and are
never scored. Decoding is deterministic (temperature 0, repetition
penalty 1.0) under a non-thinking system prompt. Choice tasks score
accuracy via an answer-extraction cascade; translation tasks score
corpus chrF++.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..client import ChatRequest, TeacherClient
from ..errors import KakugoError, TooFewItems
from ..templates import load_template
from .benchmarks import EvalItem, EvalTask, TRANSLATION
from .chrf import ChrfParams, corpus_chrf_pp

logger = logging.getLogger(__name__)

N_SHOTS = 3
EVAL_TEMPERATURE = 0.0
EVAL_REPETITION_PENALTY = 1.0


@dataclass
class EvalConfig:
    model_id: str = "student"
    max_in_flight: int = 8
    max_tokens: Optional[int] = 512
    source_language: str = "English"
    target_language: str = "the target language"
    chrf_params: ChrfParams = field(default_factory=ChrfParams)
    resource_dir: Optional[Path] = None


@dataclass
class FewShotTemplate:
    exemplars: List[EvalItem]
    item_template: str
    source_language: str = "English"
    target_language: str = "the target language"

    def __post_init__(self) -> None:
        if len(self.exemplars) != N_SHOTS:
            raise ValueError(f"expected exactly {N_SHOTS} exemplars")

    def _render_item(self, item: EvalItem, answer: str) -> str:
        if item.choices:
            options = "\n".join(f"{label}. {text}" for label, text in item.choices)
            context = f"Passage: {item.context}\n" if item.context else ""
            return self.item_template.format(
                context=context, question=item.question_or_source, options=options, answer=answer
            ).rstrip()
        return self.item_template.format(
            source_language=self.source_language,
            target_language=self.target_language,
            source=item.question_or_source,
            answer=answer,
        ).rstrip()

    def render(self, target: EvalItem) -> str:
        parts = [self._render_item(item, item.gold) for item in self.exemplars]
        parts.append(self._render_item(target, ""))
        return "\n\n".join(parts)


def make_template(task: EvalTask, exemplars: Sequence[EvalItem], config: EvalConfig) -> FewShotTemplate:
    name = "eval_translation_item.txt" if task.task_kind == TRANSLATION else "eval_choice_item.txt"
    return FewShotTemplate(
        exemplars=list(exemplars),
        item_template=load_template(name, config.resource_dir),
        source_language=config.source_language,
        target_language=config.target_language,
    )


def build_prompts(
    items: Sequence[EvalItem], template: FewShotTemplate
) -> List[Tuple[str, str]]:
    """(item_id, prompt) pairs for the scored set items[3:]."""
    if len(items) <= N_SHOTS:
        raise TooFewItems(f"need more than {N_SHOTS} items, got {len(items)}")
    if [i.item_id for i in items[:N_SHOTS]] != [e.item_id for e in template.exemplars]:
        raise ValueError("template exemplars must be the first three items")
    return [(item.item_id, template.render(item)) for item in items[N_SHOTS:]]


_LABEL_TOKEN_RE = re.compile(r"(?<![A-Za-z0-9])([A-J])(?![A-Za-z0-9])")


def parse_choice(model_output: str, choices: Sequence[Tuple[str, str]]) -> Optional[str]:
    """Extract a choice label, or None when unparseable.

    Cascade: exact label (case-insensitive) -> unique standalone label
    token -> unique option-text containment. Ambiguity at any step that
    would otherwise decide yields None.
    """
    if not choices:
        raise ValueError("choices must be non-empty")
    labels = [label for label, _ in choices]
    stripped = model_output.strip()
    for label in labels:
        if stripped.lower() == label.lower():
            return label
    found = {m.group(1) for m in _LABEL_TOKEN_RE.finditer(model_output) if m.group(1) in labels}
    if len(found) == 1:
        return found.pop()
    lowered = model_output.lower()
    contained = [label for label, text in choices if text and text.lower() in lowered]
    if len(contained) == 1:
        return contained[0]
    return None


@dataclass
class EvalReport:
    benchmark: str
    language_code: str
    task_kind: str
    n_scored: int
    score: float  # accuracy in [0,1] for choice tasks, chrF++ in [0,100] for translation
    predictions: List[dict]

    def to_json(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "language_code": self.language_code,
            "task_kind": self.task_kind,
            "n_scored": self.n_scored,
            "score": self.score,
            "predictions": self.predictions,
        }


def run_eval(
    task: EvalTask,
    items: Sequence[EvalItem],
    client: TeacherClient,
    config: Optional[EvalConfig] = None,
) -> EvalReport:
    """Evaluate one task; transport failures score as wrong."""
    config = config or EvalConfig()
    template = make_template(task, items[:N_SHOTS], config)
    prompts = build_prompts(items, template)
    system = load_template("eval_system.txt", config.resource_dir)
    requests = [
        ChatRequest.build(
            model_id=config.model_id,
            messages=[("system", system), ("user", prompt)],
            temperature=EVAL_TEMPERATURE,
            max_tokens=config.max_tokens,
            repetition_penalty=EVAL_REPETITION_PENALTY,
        )
        for _item_id, prompt in prompts
    ]
    responses = client.complete_batch(requests, max_in_flight=config.max_in_flight)
    scored = items[N_SHOTS:]
    predictions: List[dict] = []
    if task.task_kind == TRANSLATION:
        hypotheses: List[str] = []
        for item, response in zip(scored, responses):
            hypothesis = "" if isinstance(response, KakugoError) else response.final_text.strip()
            hypotheses.append(hypothesis)
            predictions.append({"item_id": item.item_id, "prediction": hypothesis, "gold": item.gold})
        score = corpus_chrf_pp(hypotheses, [[item.gold] for item in scored], config.chrf_params)
    else:
        correct = 0
        for item, response in zip(scored, responses):
            label: Optional[str] = None
            if not isinstance(response, KakugoError):
                label = parse_choice(response.final_text, item.choices)
            is_correct = label == item.gold
            correct += is_correct
            predictions.append(
                {"item_id": item.item_id, "prediction": label, "gold": item.gold, "correct": is_correct}
            )
        score = correct / len(scored)
    return EvalReport(
        benchmark=task.benchmark,
        language_code=task.language_code,
        task_kind=task.task_kind,
        n_scored=len(scored),
        score=score,
        predictions=predictions,
    )
