"""Dataset registration in the training tool's dataset_info.json registry."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .errors import LauncherError, SchemaError

_ROLES = ("human", "gpt")


def validate_export(export_path: Path) -> int:
    """Check the conversation-format contract; returns the record count.

    Every record needs a system string and an alternating human/gpt
    conversation that starts with human and contains at least one
    non-empty gpt turn.
    """
    export_path = Path(export_path)
    if not export_path.exists():
        raise SchemaError(f"export file not found: {export_path}")
    try:
        data = json.loads(export_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SchemaError(f"export is not valid JSON: {exc}")
    if not isinstance(data, list) or not data:
        raise SchemaError("export must be a non-empty JSON array of records")
    for i, record in enumerate(data):
        if not isinstance(record, dict) or set(record) != {"system", "conversations"}:
            raise SchemaError(f"record {i}: expected exactly the system and conversations keys")
        if not isinstance(record["system"], str) or not record["system"].strip():
            raise SchemaError(f"record {i}: system message must be a non-empty string")
        turns = record["conversations"]
        if not isinstance(turns, list) or not turns:
            raise SchemaError(f"record {i}: conversations must be a non-empty list")
        for j, turn in enumerate(turns):
            if not isinstance(turn, dict) or set(turn) != {"from", "value"}:
                raise SchemaError(f"record {i} turn {j}: expected from/value keys")
            if turn["from"] != _ROLES[j % 2]:
                raise SchemaError(
                    f"record {i} turn {j}: expected role {_ROLES[j % 2]!r}, got {turn['from']!r}"
                )
            if not isinstance(turn["value"], str) or not turn["value"].strip():
                raise SchemaError(f"record {i} turn {j}: empty value")
        if len(turns) < 2:
            raise SchemaError(f"record {i}: conversation lacks an assistant turn")
    return len(data)


def register_dataset(
    export_path: Union[str, Path], name: str, registry_path: Union[str, Path]
) -> dict:
    """Add one dataset entry; same name and path is a no-op.

    The registry is validated and written only after the export passes
    schema checks, so a bad export never mutates it.
    """
    export_path = Path(export_path)
    registry_path = Path(registry_path)
    validate_export(export_path)
    registry = {}
    if registry_path.exists():
        try:
            registry = json.loads(registry_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise LauncherError(f"registry file is corrupt: {exc}")
    entry = {
        "file_name": str(export_path),
        "formatting": "sharegpt",
        "columns": {"messages": "conversations", "system": "system"},
        "tags": {"role_tag": "from", "content_tag": "value", "user_tag": "human", "assistant_tag": "gpt"},
    }
    existing = registry.get(name)
    if existing is not None:
        if existing == entry:
            return entry
        raise LauncherError(f"dataset {name!r} already registered with a different path")
    registry[name] = entry
    registry_path.parent.mkdir(parents=True, exist_ok=True)
    registry_path.write_text(json.dumps(registry, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return entry
