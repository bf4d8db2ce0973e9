from .benchmarks import EvalItem, EvalTask, load_benchmark
from .chrf import ChrfParams, chrf_pp, corpus_chrf_pp
from .harness import EvalConfig, EvalReport, FewShotTemplate, build_prompts, parse_choice, run_eval

__all__ = [
    "EvalItem",
    "EvalTask",
    "load_benchmark",
    "ChrfParams",
    "chrf_pp",
    "corpus_chrf_pp",
    "EvalConfig",
    "EvalReport",
    "FewShotTemplate",
    "build_prompts",
    "parse_choice",
    "run_eval",
]
