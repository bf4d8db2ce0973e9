"""Template resources and teacher-output JSON extraction."""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .errors import GenerationParseError

_FENCED_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)
_LIST_KEYS = ("prompts", "topics", "scenarios")


def load_template(name: str, resource_dir: Optional[Path] = None) -> str:
    """Read a template by file name, from ``resource_dir`` when given."""
    if resource_dir is not None:
        return (resource_dir / name).read_text(encoding="utf-8").rstrip("\n")
    ref = resources.files("kakugo.resources").joinpath(name)
    return ref.read_text(encoding="utf-8").rstrip("\n")


def render(template: str, **values: object) -> str:
    return template.format(**values)


def load_seed_topics(language_name: str, resource_dir: Optional[Path] = None) -> List[str]:
    """The 16 seed topics: 8 general plus 8 language-specific."""
    general = load_template("topic_seeds_general.txt", resource_dir).splitlines()
    specific = load_template("topic_seeds_language.txt", resource_dir).splitlines()
    seeds = [line.strip() for line in general if line.strip()]
    seeds += [line.strip().format(language_name=language_name) for line in specific if line.strip()]
    return seeds


def extract_json_block(text: str) -> object:
    """Parse the last fenced JSON block in a teacher response.

    Models add prose around the requested block, so everything outside
    the final fence is ignored. Falls back to parsing the whole text
    when no fence is present.
    """
    blocks = _FENCED_RE.findall(text)
    candidates = list(reversed(blocks)) + [text.strip()]
    for candidate in candidates:
        candidate = candidate.strip()
        if not candidate:
            continue
        try:
            return json.loads(candidate)
        except ValueError:
            continue
    raise GenerationParseError("no parseable JSON block in teacher output")


def extract_string_list(text: str) -> List[str]:
    """Pull a list of strings out of a teacher response.

    Accepts an object keyed by prompts/topics/scenarios, a
    single-key object whose value is a list, or a bare JSON array.
    """
    obj = extract_json_block(text)
    value: object = None
    if isinstance(obj, dict):
        for key in _LIST_KEYS:
            if key in obj:
                value = obj[key]
                break
        else:
            if len(obj) == 1:
                value = next(iter(obj.values()))
    elif isinstance(obj, list):
        value = obj
    if not isinstance(value, list):
        raise GenerationParseError("teacher output contains no list of items")
    items = [item.strip() for item in value if isinstance(item, str) and item.strip()]
    return items


def extract_improved_prompt(text: str) -> str:
    obj = extract_json_block(text)
    if not isinstance(obj, dict) or "improved_prompt" not in obj:
        raise GenerationParseError('teacher output lacks the "improved_prompt" key')
    improved = obj["improved_prompt"]
    if not isinstance(improved, str) or not improved.strip():
        raise GenerationParseError('"improved_prompt" is not a non-empty string')
    return improved
