"""Command-line entry point: one subcommand per pipeline stage.

Stage outputs are plain files (17-digit decimals in JSON/CSV), so later
stages re-read earlier results losslessly instead of re-reading tensors:
``select`` works entirely from ``corr``/``eval`` output. Exit codes: 0
success, 1 usage error, 2 data or validation error. All diagnostics go
to stderr; data goes to files or stdout. Set DIPE_LOG=debug|info for
progress logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import correlation, fusion, metrics, report, selection, synth, tensor_io
from .errors import DipeError
from .parallel import default_threads

log = logging.getLogger("dipe")


class _Parser(argparse.ArgumentParser):
    # Usage problems must exit 1; argparse's default is 2, which this
    # tool reserves for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threshold",
        type=float,
        default=metrics.DEFAULT_THRESHOLD,
        help="probability cutoff for binarization (default %(default)s)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=default_threads(),
        help="worker threads; results are identical for any value (default: hardware count)",
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="dipe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("eval", help="score each model individually (JSON)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write JSON here instead of stdout")
    _add_common(p)

    p = sub.add_parser("corr", help="pairwise-agreement matrix (CSV + PGM)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output base path; writes BASE.csv and BASE.pgm")
    _add_common(p)

    p = sub.add_parser("select", help="build an ensemble from corr/eval outputs (JSON)")
    p.add_argument(
        "--strategy",
        required=True,
        choices=["dipe", "dipe-ablated", "dipe_ablated", "topk", "all", "exhaustive"],
    )
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--corr", help="matrix CSV from `dipe corr` (dipe strategies)")
    p.add_argument("--scores", help="JSON from `dipe eval` (dipe/topk/all strategies)")
    p.add_argument("--manifest", help="manifest (exhaustive strategy only)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    _add_common(p)

    p = sub.add_parser("fuse", help="average member predictions; write RLE masks")
    p.add_argument("--manifest", required=True)
    p.add_argument("--selection", help="selection JSON from `dipe select`")
    p.add_argument("--members", help="comma-separated model ids (alternative to --selection)")
    p.add_argument("--out", required=True, help="RLE CSV destination")
    p.add_argument("--dipe-dir", help="also write fused probability tensors here")
    _add_common(p)

    p = sub.add_parser("report", help="sweep strategies over k; emit a comparison table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--strategies", required=True, help="comma list: topk,dipe,dipe-ablated,exhaustive")
    p.add_argument("--k", required=True, help="budget range: N, A..B, or comma list")
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument(
        "--format",
        choices=["table", "csv"],
        help="default: csv when --out is given, table otherwise",
    )
    _add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic dataset + model zoo")
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _parse_k_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        if "," in text:
            return [int(tok) for tok in text.split(",")]
        return [int(text)]
    except ValueError:
        raise DipeError(f"cannot parse k range {text!r}: use N, A..B, or a comma list") from None


def _read_scores(path: str) -> tuple[list[str], list[float]]:
    # Scores JSON maps model_id to {"dice", "iou"}; key order is the
    # manifest model order and is what aligns d with the matrix axes.
    try:
        doc = json.loads(Path(path).read_text())
        ids = list(doc)
        dice = [float(doc[model_id]["dice"]) for model_id in ids]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise DipeError(f"{path}: malformed scores JSON: {exc}") from exc
    return ids, dice


def _cmd_eval(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    scores = metrics.score_models(manifest, args.threshold, threads=args.threads)
    log.info("scored %d models on %d slices", manifest.n_models, manifest.n_slices)
    doc = {s.model_id: {"dice": s.dice, "iou": s.iou} for s in scores}
    _emit(metrics.dumps_json17(doc) + "\n", args.out)
    return 0


def _cmd_corr(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    corr = correlation.correlation_matrix(manifest, args.threshold, threads=args.threads)
    csv_path, pgm_path = correlation.export_heatmap(corr, args.out)
    log.info("wrote %s and %s", csv_path, pgm_path)
    return 0


def _cmd_select(args) -> int:
    strategy = args.strategy.replace("-", "_")
    if strategy in ("dipe", "dipe_ablated"):
        if not args.corr or not args.scores:
            raise DipeError(f"strategy {args.strategy} needs both --corr and --scores")
        corr = correlation.read_correlation_csv(args.corr)
        ids, d = _read_scores(args.scores)
        if list(corr.model_ids) != ids:
            raise DipeError(
                "--corr and --scores disagree on the model pool: "
                f"{list(corr.model_ids)} vs {ids}"
            )
        if strategy == "dipe":
            chosen = selection.select_dipe(corr, d, args.k)
        else:
            chosen = selection.select_dipe_ablated(corr, d, args.k)
    elif strategy == "topk":
        if not args.scores:
            raise DipeError("strategy topk needs --scores")
        ids, d = _read_scores(args.scores)
        chosen = selection.select_topk(d, args.k)
    elif strategy == "all":
        if not args.scores:
            raise DipeError("strategy all needs --scores")
        ids, _ = _read_scores(args.scores)
        chosen = selection.select_all(len(ids))
    else:
        if not args.manifest:
            raise DipeError("strategy exhaustive needs --manifest")
        manifest = tensor_io.load_manifest(args.manifest)
        ids = manifest.model_ids()
        chosen = selection.select_exhaustive(
            manifest, args.k, args.threshold, threads=args.threads
        )
    log.info("selected %s", chosen.members)
    doc = selection.selection_to_dict(chosen, ids)
    _emit(metrics.dumps_json17(doc) + "\n", args.out)
    return 0


def _cmd_fuse(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    if bool(args.selection) == bool(args.members):
        raise DipeError("pass exactly one of --selection or --members")
    if args.selection:
        try:
            doc = json.loads(Path(args.selection).read_text())
        except json.JSONDecodeError as exc:
            raise DipeError(f"{args.selection}: invalid JSON: {exc}") from exc
        members = selection.selection_from_dict(doc, manifest.model_ids()).members
    else:
        index_of = {m: i for i, m in enumerate(manifest.model_ids())}
        members = []
        for model_id in args.members.split(","):
            if model_id not in index_of:
                raise DipeError(f"unknown model id {model_id!r}")
            members.append(index_of[model_id])
    fusion.export_fused(
        manifest,
        members,
        rle_path=args.out,
        dipe_dir=args.dipe_dir,
        threshold_value=args.threshold,
        threads=args.threads,
    )
    log.info("fused %d members over %d slices", len(members), manifest.n_slices)
    return 0


def _cmd_report(args) -> int:
    manifest = tensor_io.load_manifest(args.manifest)
    strategies = [s.replace("-", "_") for s in args.strategies.split(",") if s]
    k_values = _parse_k_range(args.k)
    result = report.sweep(
        manifest, strategies, k_values, args.threshold, threads=args.threads
    )
    fmt = args.format or ("csv" if args.out else "table")
    _emit(report.render(result, fmt), args.out)
    return 0


def _cmd_synth(args) -> int:
    spec = synth.load_synth_spec(args.spec)
    synth.generate(spec, args.out)
    log.info(
        "generated %d slices x %d models under %s", spec.slices, len(spec.models), args.out
    )
    sys.stdout.write(str(Path(args.out) / "manifest.json") + "\n")
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "corr": _cmd_corr,
    "select": _cmd_select,
    "fuse": _cmd_fuse,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def _configure_logging() -> None:
    level = {"debug": logging.DEBUG, "info": logging.INFO, "warning": logging.WARNING}.get(
        os.environ.get("DIPE_LOG", "").lower(), logging.WARNING
    )
    logging.basicConfig(
        stream=sys.stderr,
        level=level,
        format="dipe: %(levelname)s: %(message)s",
        force=True,
    )


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except DipeError as exc:
        print(f"dipe: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dipe: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
