"""Pairwise-agreement matrix over thresholded model predictions.

The matrix entry C[i][j] is the mean Dice between model i's and model j's
thresholded masks over all slices: an agreement measure on [0, 1], not a
statistical correlation coefficient. The matrix is symmetric with a unit
diagonal; n stays small (a model zoo, not a dataset), so it is dense.

Computation is slice-major: each slice's n masks are loaded once and all
pairs are scored on them, then per-slice matrices are folded in ascending
slice order. This reproduces the per-pair ordered reduction bit for bit
while reading each tensor file once instead of n-1 times.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DipeError
from .metrics import DEFAULT_THRESHOLD, dataset_dice, render_float17, slice_dice, threshold
from .parallel import ordered_map
from .tensor_io import Manifest


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric pairwise-Dice matrix with unit diagonal, entries in [0, 1]."""

    model_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        n = len(self.model_ids)
        if n < 1:
            raise DipeError("correlation matrix needs at least one model")
        if arr.shape != (n, n):
            raise DipeError(f"matrix shape {arr.shape} does not match {n} model ids")
        if not np.array_equal(arr, arr.T):
            raise DipeError("correlation matrix is not symmetric")
        if not np.all(np.diag(arr) == 1.0):
            raise DipeError("correlation matrix diagonal must be exactly 1")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            raise DipeError("correlation entries must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return len(self.model_ids)

    def entry(self, i: int, j: int) -> float:
        return float(self.values[i, j])


def pairwise_dice(masks_a, masks_b) -> float:
    """Mean Dice between two models over aligned per-slice mask sets."""
    return dataset_dice(masks_a, masks_b)


def correlation_matrix(
    manifest: Manifest,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> CorrelationMatrix:
    """Compute the full pairwise matrix for a manifest's model pool.

    Each unordered pair is computed once and mirrored; the diagonal is set
    to 1 without computation. Slices may be processed concurrently; the
    cross-slice fold stays in ascending slice order either way.
    """
    n = manifest.n_models
    if n < 1:
        raise DipeError("manifest has no models")
    if not manifest.slices:
        raise DipeError("manifest has no included slices")

    def per_slice(rec):
        masks = [
            threshold(manifest.load_prediction(i, rec.slice_id), threshold_value)
            for i in range(n)
        ]
        mat = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                v = slice_dice(masks[i], masks[j])
                mat[i, j] = v
                mat[j, i] = v
        return mat

    total = np.zeros((n, n), dtype=np.float64)
    for mat in ordered_map(per_slice, manifest.slices, threads=threads):
        total += mat
    values = total / len(manifest.slices)
    np.fill_diagonal(values, 1.0)
    return CorrelationMatrix(tuple(manifest.model_ids()), values)


# ---------------------------------------------------------------------------
# CSV / pixmap export
# ---------------------------------------------------------------------------

def write_correlation_csv(corr: CorrelationMatrix, destination: str | Path) -> None:
    """Write the matrix as CSV: first row model ids, then one value row per model."""
    with open(destination, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(corr.model_ids)
        for row in corr.values:
            writer.writerow([render_float17(v) for v in row])


def read_correlation_csv(source: str | Path) -> CorrelationMatrix:
    """Parse a matrix CSV back; round-trips written matrices exactly."""
    with open(source, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DipeError(f"{source}: empty correlation CSV")
    model_ids = tuple(rows[0])
    n = len(model_ids)
    if len(rows) != n + 1:
        raise DipeError(f"{source}: expected {n} value rows, found {len(rows) - 1}")
    values = np.zeros((n, n), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        if len(row) != n:
            raise DipeError(f"{source}: row {i + 2} has {len(row)} cells, expected {n}")
        try:
            values[i] = [float(cell) for cell in row]
        except ValueError as exc:
            raise DipeError(f"{source}: row {i + 2}: {exc}") from exc
    return CorrelationMatrix(model_ids, values)


def write_pgm(corr: CorrelationMatrix, destination: str | Path) -> None:
    """Write an 8-bit binary pixmap (P5), one pixel per matrix cell.

    Brightness is linear in the cell value over [min, 1]; a constant
    matrix (min = 1) renders uniformly bright.
    """
    lo = float(corr.values.min())
    span = 1.0 - lo
    if span > 0.0:
        pixels = np.rint((corr.values - lo) / span * 255.0)
    else:
        pixels = np.full_like(corr.values, 255.0)
    body = np.clip(pixels, 0, 255).astype(np.uint8).tobytes()
    header = f"P5\n{corr.n} {corr.n}\n255\n".encode("ascii")
    Path(destination).write_bytes(header + body)


def export_heatmap(corr: CorrelationMatrix, base: str | Path) -> tuple[Path, Path]:
    """Write ``<base>.csv`` (exact values) and ``<base>.pgm`` side by side.

    A base ending in .csv or .pgm is treated as the stem. Returns the two
    paths written.
    """
    base = Path(base)
    if base.suffix in (".csv", ".pgm"):
        base = base.with_suffix("")
    csv_path = base.with_suffix(".csv")
    pgm_path = base.with_suffix(".pgm")
    write_correlation_csv(corr, csv_path)
    write_pgm(corr, pgm_path)
    return csv_path, pgm_path
