"""Acceptance suite: one test per primary property, one line each under -v.

Each test exercises a full property end to end against the deterministic
mock teacher; together they gate a release.
"""

import itertools
import json
import random
import time
from collections import Counter

import pytest

from conftest import MockTeacher
from kakugo.assembly import (
    BUDGETED_SUBSETS,
    SUBSET_SPECS,
    build_all_subsets,
    emit_training_config,
    example_tokens,
)
from kakugo.errors import KakugoError
from kakugo.evaluation.benchmarks import EvalItem, EvalTask
from kakugo.evaluation.chrf import chrf_pp
from kakugo.evaluation.harness import run_eval
from kakugo.pipeline import STAGES, Pipeline
from kakugo.prompts import GenerationSettings, PromptGenerator, draw_task
from kakugo.tokenizers import simple_count
from kakugo.translation import SourceConversation, TranslationPipeline, filter_by_ratio
from kakugo.types import GENERATED, THINKING, TRANSLATED, ConversationExample
from test_assembly import _generated, _translated
from test_chrf import PINNED_PAIRS, brute_force_chrf_pp
from test_pipeline import _config

LANG = "Javanese"


def test_acceptance_pipeline_arithmetic(client, tmp_path):
    start = time.monotonic()
    generator = PromptGenerator(client, GenerationSettings(max_in_flight=16))
    topic_pool = generator.expand_topics(LANG)
    topic_prompts = generator.generate_topic_prompts(topic_pool, LANG)
    scenario_pool = generator.expand_scenarios(LANG)
    scenario_prompts = generator.generate_scenario_prompts(scenario_pool, LANG)
    corpus = tmp_path / "ctx.jsonl"
    with corpus.open("w") as fh:
        for i in range(50):
            text = " ".join(f"doc{i}w{j}" for j in range(20))
            fh.write(json.dumps({"id": f"d{i}", "language": "jv", "text": text}) + "\n")
    sources = generator.sample_context_sources(corpus, "jv", rng_seed=1)
    context_prompts = generator.generate_context_prompts(sources, LANG)
    elapsed = time.monotonic() - start

    assert len(topic_pool) == 3536
    assert len(topic_prompts) == 10608  # saturating mock: the <= bound is tight
    assert len(scenario_pool) == 1860
    assert len(scenario_prompts) == 9300
    assert len(sources) == min(50, 10000)
    assert len(context_prompts) == 3 * len(sources)
    assert elapsed < 60


def test_acceptance_context_task_distribution():
    rng = random.Random(2024)
    n = 100_000
    counts = Counter(draw_task(rng) for _ in range(n))
    assert abs(counts["answer_question"] / n - 0.5) <= 0.01
    for task in ("translate", "summarize", "improve", "classify"):
        assert abs(counts[task] / n - 0.125) <= 0.01


def test_acceptance_translation_filter_and_conservation(teacher, client):
    # Property: keep iff 0.75 <= ratio <= 25.0.
    from kakugo.translation import TranslatedConversation

    rng = random.Random(3)
    ratios = [rng.uniform(0.0, 50.0) for _ in range(500)] + [0.75, 25.0, 0.7499, 25.0001]
    convs = [TranslatedConversation(str(i), [("user", "x")], r) for i, r in enumerate(ratios)]
    kept_ids = {c.conversation_id for c in filter_by_ratio(convs)}
    for conv in convs:
        assert (conv.conversation_id in kept_ids) == (0.75 <= conv.token_ratio <= 25.0)

    # Conservation identity on a 200-conversation fixture with injected failures.
    sources = [
        SourceConversation(
            conversation_id=f"c{i}",
            turns=[("user", f"tell me about number {i} in detail"),
                   ("assistant", f"the number {i} has several properties")],
        )
        for i in range(200)
    ]
    teacher.garble_if = lambda p: any(f"number {i} " in p["messages"][-1]["content"] for i in range(0, 200, 20))
    teacher.translation_value = (
        lambda value: value + " pad" * 300 if "number 7 " in value else f"[xx] {value}"
    )
    pipeline = TranslationPipeline(client)
    kept = pipeline.run(sources, LANG)
    stats = pipeline.stats
    assert stats.loaded == 200
    assert stats.parse_failures == 10
    assert stats.ratio_filtered == 1
    assert stats.kept == len(kept) == 189
    assert stats.conserved()


def test_acceptance_chrf_oracle_agreement():
    scripts_seen = set()
    assert len(PINNED_PAIRS) >= 20
    for hypothesis, reference, expected in PINNED_PAIRS:
        assert abs(chrf_pp(hypothesis, [reference]) - expected) <= 0.1
        assert chrf_pp(hypothesis, [hypothesis]) == pytest.approx(100.0)
        assert chrf_pp(reference, [reference]) == pytest.approx(100.0)
        assert chrf_pp("", [reference]) == 0.0
        first = reference.lstrip()[0]
        if first.isascii():
            scripts_seen.add("latin")
        elif "Ѐ" <= first <= "ӿ":
            scripts_seen.add("cyrillic")
        elif "ऀ" <= first <= "ॿ":
            scripts_seen.add("devanagari")
    assert scripts_seen == {"latin", "cyrillic", "devanagari"}
    # Exact agreement with an independent brute-force oracle on a small alphabet.
    strings = ["".join(t) for n in range(1, 5) for t in itertools.product("ab ", repeat=n)]
    rng = random.Random(1)
    for hypothesis in strings:
        reference = rng.choice(strings)
        if not hypothesis.strip() and not reference.strip():
            continue
        assert chrf_pp(hypothesis, [reference]) == pytest.approx(
            brute_force_chrf_pp(hypothesis, reference), abs=1e-9
        )


def test_acceptance_subset_budgets():
    rng = random.Random(8)
    pool = []
    i = 0
    for method in ("topic", "scenario", "context"):
        for _ in range(1200):
            pool.append(_generated(i, method, words=rng.randint(4, 60), trace_words=rng.randint(0, 30)))
            i += 1
    for j in range(1400):
        pool.append(_translated(j, words=rng.randint(4, 60)))
    assert len(pool) == 5000

    subsets, budget = build_all_subsets(pool, rng_seed=13)
    cap = budget.per_subset_cap

    # Brute-force the cap independently of the implementation under test.
    def full_total(spec):
        members = [
            e for e in pool
            if e.origin in spec.origins and (e.origin == TRANSLATED or e.method in spec.methods)
        ]
        return sum(example_tokens(e, simple_count, spec.include_reasoning) for e in members)

    assert cap == min(full_total(SUBSET_SPECS[name]) for name in BUDGETED_SUBSETS)

    for name in BUDGETED_SUBSETS:
        spec = SUBSET_SPECS[name]
        total = sum(example_tokens(e, simple_count, spec.include_reasoning) for e in subsets[name])
        max_example = max(
            example_tokens(e, simple_count, spec.include_reasoning)
            for e in pool
            if e.origin in spec.origins and (e.origin == TRANSLATED or e.method in spec.methods)
        )
        assert total <= cap, name
        assert cap - total < max_example, name

    exlim, gen_tran = subsets["genreas_tran_exlim"], subsets["gen_tran"]
    assert Counter(e.source_id for e in exlim) == Counter(e.source_id for e in gen_tran)
    exlim_tokens = sum(example_tokens(e, simple_count, False) for e in exlim)
    gen_tran_tokens = sum(example_tokens(e, simple_count, False) for e in gen_tran)
    assert exlim_tokens == gen_tran_tokens


def test_acceptance_conditional_trace_invariant(tmp_path):
    teacher = MockTeacher()
    pipeline = Pipeline(_config(tmp_path), transport=teacher.transport())
    pipeline.run()
    exports = sorted(pipeline.exports.glob("*.json"))
    assert exports
    scanned = 0
    for path in exports:
        for row in json.loads(path.read_text()):
            scanned += 1
            thinking = "Thinking mode" in row["system"]
            has_delimiters = any(
                "<think>" in turn["value"] or "</think>" in turn["value"]
                for turn in row["conversations"]
            )
            assert has_delimiters == thinking, path.name
    assert scanned > 0


def test_acceptance_evaluation_protocol(teacher, client):
    items = [
        EvalItem(
            item_id=f"q{i}",
            question_or_source=f"What is item number {i}?",
            gold="ABCD"[i % 4],
            context=f"Passage {i}.",
            choices=[(label, f"option {label.lower()}{i}") for label in "ABCD"],
        )
        for i in range(13)  # 3 exemplars + 10 scored
    ]
    k = 7  # answer the first k scored items correctly, the rest wrong

    def respond(user):
        target = user.rsplit("Question: ", 1)[-1]
        for i in range(3, 13):
            if f"What is item number {i}?" in target:
                gold = items[i].gold
                return gold if i < 3 + k else ("A" if gold != "A" else "B")
        return "?"

    teacher.response_text = respond
    report = run_eval(EvalTask("belebele", "jv"), items, client)
    assert report.n_scored == 10
    assert report.score == pytest.approx(k / 10)
    scored_ids = {p["item_id"] for p in report.predictions}
    assert scored_ids == {f"q{i}" for i in range(3, 13)}
    assert scored_ids.isdisjoint({"q0", "q1", "q2"})
    assert len(teacher.requests) == 10
    for request in teacher.requests:
        assert request["temperature"] == 0.0
        assert request["repetition_penalty"] == 1.0


def test_acceptance_end_to_end_determinism(tmp_path):
    def fresh(run_name):
        pipeline = Pipeline(_config(tmp_path, run_name), transport=MockTeacher().transport())
        manifest = pipeline.run()
        return {k: v["content_hash"] for k, v in manifest.export_reports.items()}

    hashes_a = fresh("det_a")
    hashes_b = fresh("det_b")
    assert hashes_a == hashes_b and hashes_a

    # Kill after the responses stage, then resume with a fresh process-like
    # pipeline object; the final hashes must match the uninterrupted runs.
    partial = _config(tmp_path, "det_resume")
    partial.stages = STAGES[: STAGES.index("translation")]
    Pipeline(partial, transport=MockTeacher().transport()).run()
    resumed = Pipeline(_config(tmp_path, "det_resume"), transport=MockTeacher().transport())
    manifest = resumed.run()
    assert {k: v["content_hash"] for k, v in manifest.export_reports.items()} == hashes_a


def test_acceptance_secondary_launcher(tmp_path):
    # The primary suite must run with the secondary component absent,
    # so this criterion skips rather than fails when it is not installed.
    launcher = pytest.importorskip("training_launcher")

    export = tmp_path / "gen_tran.json"
    export.write_text(
        json.dumps(
            [
                {
                    "system": "You are a helpful assistant.",
                    "conversations": [
                        {"from": "human", "value": "hi"},
                        {"from": "gpt", "value": "hello"},
                    ],
                }
            ]
        )
    )
    registry = tmp_path / "dataset_info.json"
    first = launcher.register_dataset(export, "gen_tran", registry)
    second = launcher.register_dataset(export, "gen_tran", registry)
    assert first == second
    assert list(json.loads(registry.read_text())) == ["gen_tran"]

    config = dict(launcher.TRAINING_DEFAULTS, dataset="gen_tran")
    config_path = tmp_path / "gen_tran.train.yaml"
    config_path.write_text("\n".join(f"{k}: {v}" for k, v in config.items()))
    plan = launcher.build_plan(config_path)
    assert plan.diff() == {}

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"system": "s", "conversations": [{"from": "human", "value": "x"}]}]))
    with pytest.raises(launcher.SchemaError):
        launcher.register_dataset(bad, "bad", tmp_path / "r2.json")


def test_acceptance_training_config_defaults(tmp_path):
    dataset = tmp_path / "gen_tran.json"
    dataset.write_text("[]")
    out = tmp_path / "gen_tran.train.yaml"
    config = emit_training_config(dataset, out)
    expected = {
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
        "dataset": "gen_tran",
    }
    assert config == expected
    written = {}
    for line in out.read_text().splitlines():
        key, _sep, value = line.partition(":")
        written[key.strip()] = value.strip()
    assert written == expected
