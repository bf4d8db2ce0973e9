"""Small argparse front end: register a dataset, then launch or dry-run."""

from __future__ import annotations

import argparse
import sys

from .errors import LauncherError
from .launch import build_plan, launch
from .registry import register_dataset


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kakugo-launch")
    sub = parser.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="Add an exported dataset to the tool registry.")
    reg.add_argument("--export", required=True)
    reg.add_argument("--name", required=True)
    reg.add_argument("--registry", required=True)

    run = sub.add_parser("train", help="Launch (or dry-run) training from an emitted config.")
    run.add_argument("--config", required=True)
    run.add_argument("--tool", default="llamafactory-cli")
    run.add_argument("--run", action="store_true", help="Actually invoke the tool.")

    args = parser.parse_args(argv)
    try:
        if args.command == "register":
            entry = register_dataset(args.export, args.name, args.registry)
            print(f"registered {args.name} -> {entry['file_name']}")
            return 0
        plan = build_plan(args.config, tool=args.tool, dry_run=not args.run)
        return launch(plan)
    except LauncherError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
