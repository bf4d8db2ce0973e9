"""Experimental subset construction, token budgeting, and export.

Eight comparison subsets are built from the generated+translated pool.
Seven are capped at the same token budget (the minimum full-subset
token total); the example-limited subset reuses the gen_tran sample
with reasoning traces re-attached; the full subset takes everything.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from .errors import BudgetInfeasible, ExportIOError
from .templates import load_template
from .tokenizers import TokenCounter, simple_count
from .types import GENERATED, TRANSLATED, ConversationExample

logger = logging.getLogger(__name__)

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

_ALL_METHODS = frozenset({"topic", "scenario", "context"})


@dataclass(frozen=True)
class TokenBudget:
    per_subset_cap: int
    counting_mode: str = "without_reasoning"  # informational; caps compare like with like


@dataclass(frozen=True)
class SubsetSpec:
    name: str
    origins: FrozenSet[str]
    methods: FrozenSet[str] = _ALL_METHODS
    include_reasoning: bool = False
    budgeted: bool = True
    derived_from: Optional[str] = None  # subset whose example identities are reused


SUBSET_SPECS: Dict[str, SubsetSpec] = {
    spec.name: spec
    for spec in [
        SubsetSpec("topic", frozenset({GENERATED}), frozenset({"topic"})),
        SubsetSpec("scen", frozenset({GENERATED}), frozenset({"scenario"})),
        SubsetSpec("cont", frozenset({GENERATED}), frozenset({"context"})),
        SubsetSpec("gen", frozenset({GENERATED})),
        SubsetSpec("tran", frozenset({TRANSLATED})),
        SubsetSpec("gen_tran", frozenset({GENERATED, TRANSLATED})),
        SubsetSpec(
            "genreas_tran_toklim",
            frozenset({GENERATED, TRANSLATED}),
            include_reasoning=True,
        ),
        SubsetSpec(
            "genreas_tran_exlim",
            frozenset({GENERATED, TRANSLATED}),
            include_reasoning=True,
            budgeted=False,
            derived_from="gen_tran",
        ),
        SubsetSpec(
            "genreas_tran_full",
            frozenset({GENERATED, TRANSLATED}),
            include_reasoning=True,
            budgeted=False,
        ),
    ]
}

BUDGETED_SUBSETS = tuple(name for name, spec in SUBSET_SPECS.items() if spec.budgeted)


def _matches(spec: SubsetSpec, example: ConversationExample) -> bool:
    if example.origin not in spec.origins:
        return False
    if example.origin == GENERATED and example.method is not None:
        return example.method in spec.methods
    return example.origin == TRANSLATED or example.method is None


def _filtered(spec: SubsetSpec, pool: Sequence[ConversationExample]) -> List[ConversationExample]:
    out = []
    for example in pool:
        if not _matches(spec, example):
            continue
        if not spec.include_reasoning and example.reasoning_trace is not None:
            example = replace(example, reasoning_trace=None)
        out.append(example)
    return out


def example_tokens(example: ConversationExample, counter: TokenCounter, include_reasoning: bool) -> int:
    return example.content_tokens(counter, include_reasoning=include_reasoning)


def compute_budget(
    pool: Sequence[ConversationExample], counter: TokenCounter = simple_count
) -> TokenBudget:
    """Cap = minimum full token total across the budgeted subset candidates."""
    totals = {}
    for name in BUDGETED_SUBSETS:
        spec = SUBSET_SPECS[name]
        totals[name] = sum(
            example_tokens(e, counter, spec.include_reasoning) for e in _filtered(spec, pool)
        )
    cap = min(totals.values())
    logger.info("subset token totals: %s; cap=%d", totals, cap)
    return TokenBudget(per_subset_cap=cap)


def build_subset(
    spec: SubsetSpec,
    pool: Sequence[ConversationExample],
    rng_seed: int,
    budget: Optional[TokenBudget] = None,
    base: Optional[Sequence[ConversationExample]] = None,
    counter: TokenCounter = simple_count,
) -> List[ConversationExample]:
    """Materialize one subset from the pool.

    Budgeted subsets sample uniformly (seeded per subset name) and stop
    before the first example that would overflow the cap. The derived
    (example-limited) subset takes ``base``'s identities and re-attaches
    reasoning traces from the pool.
    """
    if spec.derived_from is not None:
        if base is None:
            raise ValueError(f"subset {spec.name} requires the {spec.derived_from} subset as base")
        by_id = {e.source_id: e for e in pool}
        # Pool examples still carry their traces; taking them by identity
        # re-attaches reasoning on top of the base sample.
        return [by_id[b.source_id] for b in base]
    members = _filtered(spec, pool)
    rng = random.Random(f"{rng_seed}/{spec.name}")
    rng.shuffle(members)
    if not spec.budgeted or budget is None:
        return members
    cap = budget.per_subset_cap
    pool_total = sum(example_tokens(e, counter, spec.include_reasoning) for e in members)
    if pool_total < cap:
        raise BudgetInfeasible(f"subset {spec.name}: pool holds {pool_total} tokens < cap {cap}")
    out: List[ConversationExample] = []
    total = 0
    for example in members:
        tokens = example_tokens(example, counter, spec.include_reasoning)
        if total + tokens > cap:
            break
        out.append(example)
        total += tokens
    return out


def build_all_subsets(
    pool: Sequence[ConversationExample],
    rng_seed: int,
    counter: TokenCounter = simple_count,
) -> Tuple[Dict[str, List[ConversationExample]], TokenBudget]:
    budget = compute_budget(pool, counter)
    subsets: Dict[str, List[ConversationExample]] = {}
    for name, spec in SUBSET_SPECS.items():
        base = subsets.get(spec.derived_from) if spec.derived_from else None
        subsets[name] = build_subset(spec, pool, rng_seed, budget=budget, base=base, counter=counter)
    return subsets, budget


@dataclass
class ExportRecord:
    """One export-ready conversation with its system message attached."""

    system: str
    turns: List[Tuple[str, str]]
    source_id: str
    origin: str

    def to_json(self) -> dict:
        from_for = {"user": "human", "assistant": "gpt"}
        return {
            "system": self.system,
            "conversations": [
                {"from": from_for[role], "value": content} for role, content in self.turns
            ],
        }


def attach_system_prompts(
    examples: Sequence[ConversationExample],
    language_name: str,
    resource_dir: Optional[Path] = None,
    think_markers: Tuple[str, str] = (THINK_OPEN, THINK_CLOSE),
) -> List[ExportRecord]:
    """Attach thinking/standard system messages and inline the traces.

    Generated examples get the thinking-mode message and their assistant
    turns rewritten as a delimited trace block followed by the answer;
    translated examples get the standard message untouched.
    """
    thinking = load_template("thinking_system.txt", resource_dir).format(lang_name=language_name)
    standard = load_template("response_system.txt", resource_dir).format(lang_name=language_name)
    open_mark, close_mark = think_markers
    records = []
    for example in examples:
        if example.origin == GENERATED:
            trace = example.reasoning_trace or ""
            turns = [
                (role, f"{open_mark}\n{trace}\n{close_mark}\n\n{content}" if role == "assistant" else content)
                for role, content in example.turns
            ]
            records.append(
                ExportRecord(system=thinking, turns=turns, source_id=example.source_id, origin=example.origin)
            )
        else:
            records.append(
                ExportRecord(
                    system=standard,
                    turns=list(example.turns),
                    source_id=example.source_id,
                    origin=example.origin,
                )
            )
    return records


@dataclass
class ExportReport:
    path: str
    example_count: int
    counts_by_origin: Dict[str, int]
    token_total: int
    content_hash: str

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "example_count": self.example_count,
            "counts_by_origin": self.counts_by_origin,
            "token_total": self.token_total,
            "content_hash": self.content_hash,
        }


def export_dataset(
    records: Sequence[ExportRecord],
    out_path: Path,
    rng_seed: int,
    counter: TokenCounter = simple_count,
) -> ExportReport:
    """Seeded global shuffle, then write the conversation-format JSON file."""
    if not records:
        raise ExportIOError("refusing to export an empty dataset")
    shuffled = list(records)
    random.Random(rng_seed).shuffle(shuffled)
    payload = json.dumps([r.to_json() for r in shuffled], ensure_ascii=False, indent=1)
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise ExportIOError(f"cannot write {out_path}: {exc}")
    counts: Dict[str, int] = {}
    token_total = 0
    for record in shuffled:
        counts[record.origin] = counts.get(record.origin, 0) + 1
        token_total += sum(counter(content) for _role, content in record.turns)
    return ExportReport(
        path=str(out_path),
        example_count=len(shuffled),
        counts_by_origin=counts,
        token_total=token_total,
        content_hash=hashlib.sha256(payload.encode("utf-8")).hexdigest(),
    )


# Llama-Factory-style full fine-tune settings; one epoch, cosine schedule.
TRAINING_DEFAULTS: Dict[str, str] = {
    "model_name_or_path": "ibm-granite/granite-4.0-micro",
    "stage": "sft",
    "do_train": "true",
    "finetuning_type": "full",
    "deepspeed": "examples/deepspeed/ds_z3_config.json",
    "template": "granite4",
    "cutoff_len": "8000",
    "packing": "true",
    "per_device_train_batch_size": "1",
    "gradient_accumulation_steps": "1",
    "learning_rate": "1.0e-5",
    "num_train_epochs": "1.0",
    "lr_scheduler_type": "cosine",
    "warmup_ratio": "0.05",
    "bf16": "true",
    "val_size": "0.02",
    "per_device_eval_batch_size": "1",
    "eval_strategy": "steps",
    "eval_steps": "0.2",
}


def emit_training_config(
    dataset_path: Path,
    out_path: Path,
    overrides: Optional[Dict[str, str]] = None,
) -> Dict[str, str]:
    """Write the flat key/value training config next to a dataset.

    Unoverridden fields keep their defaults exactly; the dataset name is
    derived from the export file stem.
    """
    dataset_path = Path(dataset_path)
    if not dataset_path.exists():
        raise ExportIOError(f"dataset file not found: {dataset_path}")
    config = dict(TRAINING_DEFAULTS)
    config["dataset"] = dataset_path.stem
    for key, value in (overrides or {}).items():
        config[key] = str(value)
    lines = [f"{key}: {value}" for key, value in config.items()]
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ExportIOError(f"cannot write {out_path}: {exc}")
    return config


def parse_training_config(path: Path) -> Dict[str, str]:
    config = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _sep, value = line.partition(":")
        config[key.strip()] = value.strip()
    return config
