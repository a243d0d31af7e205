"""Command-line entry point: export a user model zoo to a dataset directory.

The config JSON names an importable module that owns the models and the
dataset; this keeps frameworks, checkpoints, and preprocessing entirely
on the user's side of the fence:

    {"module": "my_zoo", "search_path": ["."]}

The module must define ``CLASS_NAMES`` plus two zero-argument callables,
``models()`` and ``slices()``, whose items the exporter accepts (see
ModelSpec and SliceSample). ``search_path`` entries are resolved
relative to the config file and prepended to sys.path.

Exit codes: 0 success, 1 usage error, 2 config/data/export error.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from pathlib import Path

from .export import ExportError, export


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is taken by data errors here.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"dipe-export: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_user_module(config_path: str):
    path = Path(config_path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ExportError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "module" not in doc:
        raise ExportError(f"{path}: config must be an object with a 'module' key")
    for entry in reversed(doc.get("search_path", [])):
        sys.path.insert(0, str((path.parent / entry).resolve()))
    try:
        module = importlib.import_module(str(doc["module"]))
    except ImportError as exc:
        raise ExportError(f"cannot import module {doc['module']!r}: {exc}") from exc
    for attr in ("CLASS_NAMES", "models", "slices"):
        if not hasattr(module, attr):
            raise ExportError(f"module {doc['module']!r} does not define {attr}")
    return module


def main(argv=None) -> int:
    parser = _Parser(prog="dipe-export", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="config JSON naming the user module")
    parser.add_argument("--out", required=True, help="dataset directory to write")
    args = parser.parse_args(argv)

    try:
        module = _load_user_module(args.config)
        manifest = export(module.models(), module.slices(), module.CLASS_NAMES, args.out)
    except (ExportError, OSError) as exc:
        print(f"dipe-export: error: {exc}", file=sys.stderr)
        return 2
    print(manifest)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
