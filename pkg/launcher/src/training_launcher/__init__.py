"""Glue between exported conversation datasets and the fine-tuning tool.

Registers datasets in the tool's JSON registry, validates the emitted
training config against the expected defaults, and assembles the launch
command. Training itself runs in the external tool.
"""

from .errors import LauncherError, SchemaError, ToolNotFound
from .launch import TRAINING_DEFAULTS, LaunchPlan, build_plan, config_diff, launch, read_config
from .registry import register_dataset

__all__ = [
    "TRAINING_DEFAULTS",
    "LaunchPlan",
    "LauncherError",
    "SchemaError",
    "ToolNotFound",
    "build_plan",
    "config_diff",
    "launch",
    "read_config",
    "register_dataset",
]

__version__ = "0.1.0"
