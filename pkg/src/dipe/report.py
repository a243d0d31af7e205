"""Budget-sweep harness: run strategies across k, fuse, and tabulate.

One sweep scores every model and computes the correlation matrix once,
then builds each (strategy, k) ensemble from those shared inputs. Rows
come out k-ascending with strategies in caller order, and the all-models
reference row always closes the table. Caching is invisible: every row
equals what an independent single-k run would produce.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .correlation import correlation_matrix
from .errors import DipeError
from .fusion import evaluate_members
from .metrics import DEFAULT_THRESHOLD, dice_vector, render_float17, score_models
from .selection import (
    EnsembleSelection,
    select_all,
    select_dipe,
    select_dipe_ablated,
    select_exhaustive,
    select_topk,
)
from .tensor_io import Manifest

SWEEP_STRATEGIES = ("dipe", "dipe_ablated", "topk", "exhaustive")
SWEEP_COLUMNS = ("k", "strategy", "dice", "iou")


@dataclass(frozen=True)
class SweepRow:
    k: int
    strategy: str
    dice: float
    iou: float


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    # Selections keyed by (strategy, k); audit data, not part of the CSV
    # form, so excluded from equality.
    selections: dict = field(default_factory=dict, compare=False)


def sweep(
    manifest: Manifest,
    strategies,
    k_values,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> SweepReport:
    """Evaluate each strategy at each k, plus the all-models reference row.

    An empty k_values produces an empty report (no reference row either):
    nothing was swept. The reference row reports k = n under strategy "all".
    """
    strategies = list(strategies)
    for s in strategies:
        if s not in SWEEP_STRATEGIES:
            raise DipeError(
                f"unknown sweep strategy {s!r} (choose from {', '.join(SWEEP_STRATEGIES)};"
                f" the all-models row is always included)"
            )
    k_values = list(k_values)
    if not k_values:
        return SweepReport(rows=())

    n = manifest.n_models
    for k in k_values:
        if not 1 <= k <= n:
            raise DipeError(f"k out of range: need 1 <= k <= {n}, got {k}")

    scores = score_models(manifest, threshold_value, threads=threads)
    d = dice_vector(scores)
    corr = correlation_matrix(manifest, threshold_value, threads=threads)

    def build(strategy: str, k: int) -> EnsembleSelection:
        if strategy == "dipe":
            return select_dipe(corr, d, k)
        if strategy == "dipe_ablated":
            return select_dipe_ablated(corr, d, k)
        if strategy == "topk":
            return select_topk(d, k)
        return select_exhaustive(manifest, k, threshold_value, threads=threads)

    rows = []
    selections = {}
    for k in k_values:
        for strategy in strategies:
            selection = build(strategy, k)
            dice, iou = evaluate_members(
                manifest, selection.members, threshold_value, threads=threads
            )
            rows.append(SweepRow(k=k, strategy=strategy, dice=dice, iou=iou))
            selections[(strategy, k)] = selection

    reference = select_all(n)
    dice, iou = evaluate_members(
        manifest, reference.members, threshold_value, threads=threads
    )
    rows.append(SweepRow(k=n, strategy="all", dice=dice, iou=iou))
    selections[("all", n)] = reference
    return SweepReport(rows=tuple(rows), selections=selections)


def render(report: SweepReport, format: str = "table") -> str:
    """Render a report as an aligned text table or as CSV.

    Column order is fixed (k, strategy, dice, iou). CSV uses 17-digit
    floats, so parse_sweep_csv(render(r, "csv")) == r.
    """
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(SWEEP_COLUMNS)
        for row in report.rows:
            writer.writerow(
                [row.k, row.strategy, render_float17(row.dice), render_float17(row.iou)]
            )
        return buf.getvalue()
    if format == "table":
        cells = [list(SWEEP_COLUMNS)]
        for row in report.rows:
            cells.append(
                [str(row.k), row.strategy, f"{row.dice:.6f}", f"{row.iou:.6f}"]
            )
        widths = [max(len(r[c]) for r in cells) for c in range(len(SWEEP_COLUMNS))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in cells]
        return "\n".join(lines) + "\n"
    raise DipeError(f"unknown render format {format!r} (choose table or csv)")


def parse_sweep_csv(text: str) -> SweepReport:
    """Parse the CSV rendering back into a report (rows only, no selections)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SWEEP_COLUMNS:
        raise DipeError(f"sweep CSV must start with header {','.join(SWEEP_COLUMNS)!r}")
    parsed = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(SWEEP_COLUMNS):
            raise DipeError(f"sweep CSV row {i} has {len(row)} cells")
        try:
            parsed.append(
                SweepRow(
                    k=int(row[0]),
                    strategy=row[1],
                    dice=float(row[2]),
                    iou=float(row[3]),
                )
            )
        except ValueError as exc:
            raise DipeError(f"sweep CSV row {i}: {exc}") from exc
    return SweepReport(rows=tuple(parsed))
