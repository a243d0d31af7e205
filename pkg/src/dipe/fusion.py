"""Soft plurality voting and end-to-end evaluation of fused ensembles.

Fusion is the pixel-wise arithmetic mean of the member probability maps:
per-class probabilities are averaged independently (no cross-class
normalization) and thresholding always happens after averaging. Member
maps are summed in ascending model-index order in float64 and divided
once, so the result is bit-identical under any permutation of the member
list and any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionMismatchError, DipeError
from .metrics import DEFAULT_THRESHOLD, slice_dice, slice_iou, threshold
from .parallel import ordered_map, ordered_sum
from .tensor_io import (
    BinaryMaskSet,
    Manifest,
    ProbabilityMap,
    encode_rle,
    write_probability_map,
    write_rle_csv,
)

if TYPE_CHECKING:
    from .selection import EnsembleSelection


@dataclass(frozen=True)
class FusedPrediction:
    """One slice's fused output: mean probabilities and the thresholded masks."""

    slice_id: str
    probabilities: ProbabilityMap
    masks: BinaryMaskSet


def fuse_stack(maps) -> ProbabilityMap:
    """Mean of already-loaded probability maps, summed in the order given.

    Accumulates in float64, divides once, and stores the result at the
    payload precision (float32), keeping fused values inside [0, 1].
    """
    if not maps:
        raise DipeError("cannot fuse an empty member list")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise DimensionMismatchError(
                f"member maps disagree on shape: {m.shape} vs {shape}"
            )
    total = np.zeros(shape, dtype=np.float64)
    for m in maps:
        total += m.values
    return ProbabilityMap((total / len(maps)).astype(np.float32))


def _check_members(manifest: Manifest, members) -> list[int]:
    if not len(members):
        raise DipeError("member list is empty")
    for i in members:
        if not 0 <= i < manifest.n_models:
            raise DipeError(f"member index {i} out of range for {manifest.n_models} models")
    return sorted(members)


def fuse(manifest: Manifest, members, slice_id: str, load=None) -> ProbabilityMap:
    """Fused probability map for one slice over the given member indices."""
    ordered = _check_members(manifest, members)
    if load is None:
        load = manifest.load_prediction
    return fuse_stack([load(i, slice_id) for i in ordered])


def fuse_prediction(
    manifest: Manifest,
    members,
    slice_id: str,
    threshold_value: float = DEFAULT_THRESHOLD,
) -> FusedPrediction:
    """Fused probabilities plus the thresholded masks for one slice."""
    probs = fuse(manifest, members, slice_id)
    return FusedPrediction(slice_id, probs, threshold(probs, threshold_value))


def evaluate_members(
    manifest: Manifest,
    members,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
    load=None,
) -> tuple[float, float]:
    """Dataset (dice, iou) of the fused, thresholded ensemble vs ground truth.

    Slices may be evaluated concurrently; the cross-slice mean is folded
    in ascending slice order regardless of thread count.
    """
    ordered = _check_members(manifest, members)
    if not manifest.slices:
        raise DipeError("manifest has no included slices")
    if load is None:
        load = manifest.load_prediction

    def per_slice(rec):
        fused = fuse_stack([load(i, rec.slice_id) for i in ordered])
        mask = threshold(fused, threshold_value)
        return slice_dice(rec.truth, mask), slice_iou(rec.truth, mask)

    pairs = list(ordered_map(per_slice, manifest.slices, threads=threads))
    n = len(pairs)
    dice = ordered_sum([p[0] for p in pairs]) / n
    iou = ordered_sum([p[1] for p in pairs]) / n
    return dice, iou


def evaluate_ensemble(
    selection: "EnsembleSelection",
    manifest: Manifest,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> tuple[float, float]:
    """Dataset (dice, iou) for a selection produced by any strategy."""
    return evaluate_members(
        manifest, selection.members, threshold_value=threshold_value, threads=threads
    )


def export_fused(
    manifest: Manifest,
    members,
    rle_path: str | Path,
    dipe_dir: str | Path | None = None,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> None:
    """Write fused masks as an RLE CSV, and optionally the fused maps as tensors.

    The CSV holds one row per (slice, class) in manifest order; tensor
    files land in ``dipe_dir/<slice_id>.dipe`` when a directory is given.
    """
    ordered = _check_members(manifest, members)
    fused_maps = list(
        ordered_map(
            lambda rec: fuse_stack(
                [manifest.load_prediction(i, rec.slice_id) for i in ordered]
            ),
            manifest.slices,
            threads=threads,
        )
    )
    rows = []
    for rec, fused in zip(manifest.slices, fused_maps):
        mask = threshold(fused, threshold_value)
        for c, class_name in enumerate(manifest.class_names):
            rows.append((rec.slice_id, class_name, encode_rle(mask.planes[c])))
    write_rle_csv(rows, rle_path)
    if dipe_dir is not None:
        dipe_dir = Path(dipe_dir)
        dipe_dir.mkdir(parents=True, exist_ok=True)
        for rec, fused in zip(manifest.slices, fused_maps):
            write_probability_map(fused, dipe_dir / f"{rec.slice_id}.dipe")
