"""Launch plans: config validation, diffing, and command assembly."""

from __future__ import annotations

import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from .errors import LauncherError, ToolNotFound

# Expected full-SFT defaults; the dataset field varies per run.
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

_IGNORED_KEYS = ("dataset",)


def read_config(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise LauncherError(f"config file not found: {path}")
    config = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise LauncherError(f"malformed config line: {line!r}")
        config[key.strip()] = value.strip()
    return config


def config_diff(config: Dict[str, str]) -> Dict[str, tuple]:
    """Fields differing from the expected defaults: key -> (expected, actual).

    The dataset field is per-run and never counted as a difference.
    """
    diff = {}
    for key, expected in TRAINING_DEFAULTS.items():
        actual = config.get(key)
        if actual != expected:
            diff[key] = (expected, actual)
    for key, actual in config.items():
        if key not in TRAINING_DEFAULTS and key not in _IGNORED_KEYS:
            diff[key] = (None, actual)
    return diff


@dataclass
class LaunchPlan:
    config_path: Path
    config: Dict[str, str]
    command: List[str]
    dry_run: bool = True

    def diff(self) -> Dict[str, tuple]:
        return config_diff(self.config)


def build_plan(
    config_path: Union[str, Path],
    tool: str = "llamafactory-cli",
    dry_run: bool = True,
) -> LaunchPlan:
    config_path = Path(config_path)
    config = read_config(config_path)
    if "dataset" not in config:
        raise LauncherError("config lacks the dataset field")
    return LaunchPlan(
        config_path=config_path,
        config=config,
        command=[tool, "train", str(config_path)],
        dry_run=dry_run,
    )


def launch(plan: LaunchPlan, runner=subprocess.call, which=shutil.which, echo=print) -> int:
    """Dry-run prints the command and the config diff; real runs delegate.

    Returns the external tool's exit status (0 for dry runs).
    """
    if plan.dry_run:
        echo("command: " + " ".join(plan.command))
        diff = plan.diff()
        if not diff:
            echo("config diff vs defaults: none")
        else:
            echo("config diff vs defaults:")
            for key, (expected, actual) in sorted(diff.items()):
                echo(f"  {key}: expected {expected!r}, configured {actual!r}")
        echo("effective config:")
        for key, value in plan.config.items():
            echo(f"  {key}: {value}")
        return 0
    if which(plan.command[0]) is None:
        raise ToolNotFound(f"training tool {plan.command[0]!r} not found on PATH")
    return runner(plan.command)
