"""End-to-end orchestration: one language name in, datasets out.

Every stage writes a line-delimited JSON checkpoint; re-running with an
intact output directory resumes after the last completed stage and
produces byte-identical final exports. Stage RNGs are derived from the
run seed and the stage name, so resumed and fresh runs agree.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .assembly import (
    SUBSET_SPECS,
    attach_system_prompts,
    build_all_subsets,
    emit_training_config,
    export_dataset,
)
from .client import ResponseCache, TeacherClient
from .errors import KakugoError, StageFailure
from .prompts import ContextSource, GenerationSettings, PromptGenerator, PromptRecord, ScenarioNode, TopicNode
from .responses import ResponseGenerator
from .tokenizers import get_counter
from .translation import TranslationPipeline, load_source
from .types import ConversationExample, read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

STAGES = (
    "topics",
    "scenarios",
    "contexts",
    "revision",
    "responses",
    "translation",
    "assembly",
    "export",
    "train_config",
)


@dataclass
class PipelineConfig:
    language_name: str = "Javanese"
    language_code: str = "jv"
    base_url: str = "http://localhost:8000"
    completion_path: str = "/v1/chat/completions"
    api_key_env: str = "KAKUGO_API_KEY"
    model_id: str = "gpt-oss-120b"
    temperature: float = 1.0
    rng_seed: int = 0
    output_root: str = "runs/default"
    cache_dir: Optional[str] = None
    offline: bool = False
    max_in_flight: int = 8
    token_counter: str = "simple"
    context_corpus: Optional[str] = None
    translation_corpus: Optional[str] = None
    translation_limit: int = 15000
    macro_topics_per_seed: int = 20
    topics_per_macro: int = 10
    prompts_per_topic: int = 3
    broad_scenarios: int = 30
    detailed_per_broad: int = 30
    prompts_per_scenario: int = 5
    context_cap: int = 10000
    context_prefix_tokens: int = 1000
    prompts_per_context: int = 3
    subsets: Sequence[str] = tuple(SUBSET_SPECS)
    stages: Sequence[str] = STAGES

    def generation_settings(self) -> GenerationSettings:
        return GenerationSettings(
            model_id=self.model_id,
            temperature=self.temperature,
            macro_topics_per_seed=self.macro_topics_per_seed,
            topics_per_macro=self.topics_per_macro,
            prompts_per_topic=self.prompts_per_topic,
            broad_scenarios=self.broad_scenarios,
            detailed_per_broad=self.detailed_per_broad,
            prompts_per_scenario=self.prompts_per_scenario,
            context_cap=self.context_cap,
            context_prefix_tokens=self.context_prefix_tokens,
            prompts_per_context=self.prompts_per_context,
            max_in_flight=self.max_in_flight,
        )

    def to_json(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        ).hexdigest()

    @classmethod
    def from_file(cls, path: Path, **overrides) -> "PipelineConfig":
        """Flat key=value (or key: value) config file; blank/# lines ignored."""
        values: Dict[str, object] = {}
        known = {f.name: f for f in fields(cls)}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _sep, raw = line.partition("=" if "=" in line else ":")
            key, raw = key.strip(), raw.strip()
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(raw, known[key].type)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(raw: str, annotation: object) -> object:
    text = str(annotation)
    if "int" in text:
        return int(raw)
    if "float" in text:
        return float(raw)
    if "bool" in text:
        return raw.lower() in ("1", "true", "yes")
    if "Sequence" in text:
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw


@dataclass
class RunManifest:
    config_hash: str = ""
    rng_seed: int = 0
    token_counter: str = "simple"
    stages: Dict[str, dict] = field(default_factory=dict)
    subset_tokens: Dict[str, int] = field(default_factory=dict)
    export_reports: Dict[str, dict] = field(default_factory=dict)
    cache_hits: int = 0
    cache_misses: int = 0

    def record_stage(self, name: str, inputs: int, outputs: int, seconds: float, **extra) -> None:
        self.stages[name] = {
            "inputs": inputs,
            "outputs": outputs,
            "drops": extra.pop("drops", 0),
            "seconds": round(seconds, 3),
            "completed": True,
            **extra,
        }

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "rng_seed": self.rng_seed,
            "token_counter": self.token_counter,
            "stages": self.stages,
            "subset_tokens": self.subset_tokens,
            "export_reports": self.export_reports,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunManifest":
        manifest = cls(
            config_hash=obj.get("config_hash", ""),
            rng_seed=obj.get("rng_seed", 0),
            token_counter=obj.get("token_counter", "simple"),
        )
        manifest.stages = obj.get("stages", {})
        manifest.subset_tokens = obj.get("subset_tokens", {})
        manifest.export_reports = obj.get("export_reports", {})
        manifest.cache_hits = obj.get("cache_hits", 0)
        manifest.cache_misses = obj.get("cache_misses", 0)
        return manifest


def stage_seed(rng_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{rng_seed}/{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class Pipeline:
    def __init__(self, config: PipelineConfig, transport=None):
        self.config = config
        self.root = Path(config.output_root)
        self.checkpoints = self.root / "checkpoints"
        self.exports = self.root / "exports"
        cache_path = Path(config.cache_dir or (self.root / "cache")) / "responses.jsonl"
        self.cache = ResponseCache(cache_path)
        self.client = TeacherClient(
            base_url=config.base_url,
            completion_path=config.completion_path,
            api_key_env=config.api_key_env,
            cache=self.cache,
            offline=config.offline,
            transport=transport,
        )
        self.counter = get_counter(config.token_counter)
        self.manifest = self._load_manifest()

    # -- manifest / checkpoint helpers -----------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def _load_manifest(self) -> RunManifest:
        if self.manifest_path.exists():
            manifest = RunManifest.from_json(json.loads(self.manifest_path.read_text()))
            if manifest.config_hash != self.config.config_hash():
                logger.warning("config changed since the checkpointed run; starting stages over")
                manifest = RunManifest()
        else:
            manifest = RunManifest()
        manifest.config_hash = self.config.config_hash()
        manifest.rng_seed = self.config.rng_seed
        manifest.token_counter = self.config.token_counter
        return manifest

    def _save_manifest(self) -> None:
        self.manifest.cache_hits = self.cache.hits
        self.manifest.cache_misses = self.cache.misses
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(
            json.dumps(self.manifest.to_json(), indent=2, ensure_ascii=False)
        )

    def _done(self, stage: str) -> bool:
        return self.manifest.stages.get(stage, {}).get("completed", False)

    def _checkpoint(self, name: str) -> Path:
        return self.checkpoints / f"{name}.jsonl"

    # -- stage implementations -------------------------------------------

    def run(self) -> RunManifest:
        for stage in STAGES:
            if stage not in self.config.stages:
                continue
            if self._done(stage):
                logger.info("stage %s already complete; skipping", stage)
                continue
            started = time.monotonic()
            try:
                inputs, outputs, extra = getattr(self, f"_stage_{stage}")()
            except KakugoError as exc:
                self._save_manifest()
                raise StageFailure(f"stage {stage} failed: {exc}") from exc
            self.manifest.record_stage(stage, inputs, outputs, time.monotonic() - started, **extra)
            self._save_manifest()
        return self.manifest

    def _generator(self) -> PromptGenerator:
        return PromptGenerator(self.client, self.config.generation_settings())

    def _stage_topics(self):
        generator = self._generator()
        pool = generator.expand_topics(self.config.language_name)
        write_jsonl(self._checkpoint("topic_pool"), (n.to_json() for n in pool))
        records = generator.generate_topic_prompts(pool, self.config.language_name)
        write_jsonl(self._checkpoint("topic_prompts"), (r.to_json() for r in records))
        return len(pool), len(records), {"pool_size": len(pool), "drops": sum(generator.drop_counts.values())}

    def _stage_scenarios(self):
        generator = self._generator()
        pool = generator.expand_scenarios(self.config.language_name)
        write_jsonl(self._checkpoint("scenario_pool"), (n.to_json() for n in pool))
        records = generator.generate_scenario_prompts(pool, self.config.language_name)
        write_jsonl(self._checkpoint("scenario_prompts"), (r.to_json() for r in records))
        return len(pool), len(records), {"pool_size": len(pool), "drops": sum(generator.drop_counts.values())}

    def _stage_contexts(self):
        if not self.config.context_corpus:
            write_jsonl(self._checkpoint("context_sources"), [])
            write_jsonl(self._checkpoint("context_prompts"), [])
            return 0, 0, {}
        generator = self._generator()
        sources = generator.sample_context_sources(
            Path(self.config.context_corpus),
            self.config.language_code,
            stage_seed(self.config.rng_seed, "contexts"),
        )
        write_jsonl(self._checkpoint("context_sources"), (s.to_json() for s in sources))
        records = generator.generate_context_prompts(sources, self.config.language_name)
        write_jsonl(self._checkpoint("context_prompts"), (r.to_json() for r in records))
        return len(sources), len(records), {"drops": sum(generator.drop_counts.values())}

    def _load_prompts(self, name: str) -> List[PromptRecord]:
        path = self._checkpoint(name)
        if not path.exists():
            return []
        return [PromptRecord.from_json(obj) for obj in read_jsonl(path)]

    def _stage_revision(self):
        records = (
            self._load_prompts("topic_prompts")
            + self._load_prompts("scenario_prompts")
            + self._load_prompts("context_prompts")
        )
        generator = self._generator()
        revised = generator.revise_prompts(
            records, stage_seed(self.config.rng_seed, "revision"), self.config.language_name
        )
        write_jsonl(self._checkpoint("prompts_revised"), (r.to_json() for r in revised))
        n_revised = sum(r.revised for r in revised)
        return len(records), len(revised), {"revised": n_revised}

    def _stage_responses(self):
        records = self._load_prompts("prompts_revised")
        generator = ResponseGenerator(self.client, self.config.generation_settings())
        examples = generator.generate_responses(records, self.config.language_name)
        write_jsonl(self._checkpoint("generated_examples"), (e.to_json() for e in examples))
        return len(records), len(examples), {"drops": generator.stats.dropped}

    def _stage_translation(self):
        if not self.config.translation_corpus:
            write_jsonl(self._checkpoint("translated_examples"), [])
            return 0, 0, {}
        sources = load_source(Path(self.config.translation_corpus), limit=self.config.translation_limit)
        pipeline = TranslationPipeline(self.client, self.config.generation_settings(), self.counter)
        examples = pipeline.run(sources, self.config.language_name)
        write_jsonl(self._checkpoint("translated_examples"), (e.to_json() for e in examples))
        stats = pipeline.stats
        return (
            stats.loaded,
            stats.kept,
            {
                "parse_failures": stats.parse_failures,
                "ratio_filtered": stats.ratio_filtered,
                "transport_drops": stats.transport_drops,
            },
        )

    def _load_pool(self) -> List[ConversationExample]:
        pool = []
        for name in ("generated_examples", "translated_examples"):
            path = self._checkpoint(name)
            if path.exists():
                pool.extend(ConversationExample.from_json(obj) for obj in read_jsonl(path))
        return pool

    def _stage_assembly(self):
        pool = self._load_pool()
        subsets, budget = build_all_subsets(pool, self.config.rng_seed, self.counter)
        for name, members in subsets.items():
            if name not in self.config.subsets:
                continue
            write_jsonl(self.checkpoints / f"subset_{name}.jsonl", (e.to_json() for e in members))
            spec = SUBSET_SPECS[name]
            self.manifest.subset_tokens[name] = sum(
                e.content_tokens(self.counter, include_reasoning=spec.include_reasoning)
                for e in members
            )
        return len(pool), sum(len(v) for n, v in subsets.items() if n in self.config.subsets), {
            "budget_cap": budget.per_subset_cap
        }

    def _stage_export(self):
        total = 0
        exported = 0
        for name in self.config.subsets:
            path = self.checkpoints / f"subset_{name}.jsonl"
            if not path.exists():
                continue
            members = [ConversationExample.from_json(obj) for obj in read_jsonl(path)]
            total += len(members)
            if not members:
                continue
            records = attach_system_prompts(members, self.config.language_name)
            report = export_dataset(
                records,
                self.exports / f"{name}.json",
                stage_seed(self.config.rng_seed, f"export/{name}"),
                self.counter,
            )
            self.manifest.export_reports[name] = report.to_json()
            exported += report.example_count
        return total, exported, {}

    def _stage_train_config(self):
        emitted = 0
        for name in self.config.subsets:
            dataset = self.exports / f"{name}.json"
            if dataset.exists():
                emit_training_config(dataset, self.exports / f"{name}.train.yaml")
                emitted += 1
        return emitted, emitted, {}


def verify_manifest(manifest: RunManifest) -> List[str]:
    """Check the conservation identities; returns human-readable failures."""
    problems = []
    translation = manifest.stages.get("translation")
    if translation:
        loaded = translation["inputs"]
        accounted = (
            translation["outputs"]
            + translation.get("parse_failures", 0)
            + translation.get("ratio_filtered", 0)
            + translation.get("transport_drops", 0)
        )
        if loaded != accounted:
            problems.append(f"translation conservation violated: {loaded} != {accounted}")
    responses = manifest.stages.get("responses")
    if responses and responses["inputs"] - responses["outputs"] != responses.get("drops", 0):
        problems.append("response drop count does not match input/output delta")
    return problems
