"""Command-line surface for the pipeline.

Exit codes: 0 success, 2 usage error, 3 stage failure.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .assembly import emit_training_config
from .client import TeacherClient
from .errors import KakugoError
from .evaluation import EvalConfig, EvalTask, load_benchmark, run_eval
from .pipeline import STAGES, Pipeline, PipelineConfig, RunManifest, verify_manifest

GENERATION_STAGES = STAGES[: STAGES.index("assembly")]
ASSEMBLY_STAGES = ("assembly", "export", "train_config")


def _build_config(config_file, **flags) -> PipelineConfig:
    overrides = {key: value for key, value in flags.items() if value not in (None, ())}
    if config_file:
        return PipelineConfig.from_file(Path(config_file), **overrides)
    return PipelineConfig(**overrides)


def _common_options(fn):
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True), help="Flat key=value config file."),
        click.option("--language", "language_name", help="Target language name."),
        click.option("--language-code", help="Target language code for corpus filtering."),
        click.option("--seed", "rng_seed", type=int, help="Run RNG seed."),
        click.option("--endpoint", "base_url", help="Teacher endpoint base URL."),
        click.option("--cache-dir", help="Shared response cache directory."),
        click.option("--max-in-flight", type=int, help="Concurrent teacher requests."),
        click.option("--out", "output_root", help="Run output directory."),
        click.option("--subset", "subsets", multiple=True, help="Subset name(s) to build/export."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Synthetic data generation and evaluation for low-resource SLMs."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _run_stages(config: PipelineConfig, stages, dry_run: bool) -> None:
    config.stages = tuple(stages)
    if dry_run:
        click.echo("stage plan (dry run, no requests issued):")
        for stage in config.stages:
            click.echo(f"  {stage}")
        return
    pipeline = Pipeline(config)
    try:
        pipeline.run()
    except KakugoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"manifest written to {pipeline.manifest_path}")


@main.command()
@_common_options
@click.option("--context-corpus", type=click.Path(), help="Language-labelled corpus for context prompts.")
@click.option("--translation-corpus", type=click.Path(), help="Instruction corpus to translate.")
@click.option("--dry-run", is_flag=True, help="Print the stage plan without any network calls.")
def generate(config_file, dry_run, **flags) -> None:
    """Run data creation: prompts, responses, and translation."""
    config = _build_config(config_file, **flags)
    _run_stages(config, GENERATION_STAGES, dry_run)


@main.command()
@_common_options
@click.option("--dry-run", is_flag=True)
def assemble(config_file, dry_run, **flags) -> None:
    """Build subsets over existing checkpoints and export datasets."""
    config = _build_config(config_file, **flags)
    _run_stages(config, ASSEMBLY_STAGES, dry_run)


@main.command(name="eval")
@click.option("--benchmark", required=True, type=click.Choice(["belebele", "global_mmlu", "sib200", "flores_xx_en", "flores_en_xx"]))
@click.option("--language-code", required=True)
@click.option("--language", "language_name", default="the target language")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--endpoint", "base_url", default="http://localhost:8000")
@click.option("--model", "model_id", default="student")
@click.option("--max-in-flight", type=int, default=8)
@click.option("--out", "out_path", type=click.Path(), help="Report JSON path (default stdout).")
def eval_command(benchmark, language_code, language_name, data_path, base_url, model_id, max_in_flight, out_path) -> None:
    """Run one benchmark task against a model endpoint."""
    task = EvalTask(benchmark=benchmark, language_code=language_code)
    items = load_benchmark(benchmark, language_code, Path(data_path))
    client = TeacherClient(base_url=base_url)
    eval_config = EvalConfig(
        model_id=model_id,
        max_in_flight=max_in_flight,
        target_language=language_name,
    )
    if benchmark == "flores_xx_en":
        eval_config.source_language, eval_config.target_language = language_name, "English"
    try:
        report = run_eval(task, items, client, eval_config)
    except KakugoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    payload = json.dumps(report.to_json(), indent=2, ensure_ascii=False)
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
        click.echo(f"report written to {out_path}")
    else:
        click.echo(payload)


@main.command(name="emit-train-config")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config field.")
def emit_train_config(dataset_path, out_path, overrides) -> None:
    """Write the training configuration for an exported dataset."""
    parsed = {}
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep:
            raise click.UsageError(f"expected KEY=VALUE, got {override!r}")
        parsed[key.strip()] = value.strip()
    try:
        config = emit_training_config(Path(dataset_path), Path(out_path), parsed)
    except KakugoError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    click.echo(f"wrote {out_path} ({len(config)} fields)")


@main.command()
@click.option("--out", "output_root", required=True, type=click.Path(exists=True))
def report(output_root) -> None:
    """Print a finished run's manifest and verify its count identities."""
    manifest_path = Path(output_root) / "manifest.json"
    if not manifest_path.exists():
        click.echo(f"error: no manifest at {manifest_path}", err=True)
        sys.exit(3)
    manifest = RunManifest.from_json(json.loads(manifest_path.read_text()))
    click.echo(json.dumps(manifest.to_json(), indent=2, ensure_ascii=False))
    problems = verify_manifest(manifest)
    if problems:
        for problem in problems:
            click.echo(f"FAIL {problem}", err=True)
        sys.exit(3)
    click.echo("conservation identities verified")


if __name__ == "__main__":
    main()
