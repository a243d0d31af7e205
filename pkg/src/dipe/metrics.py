"""Overlap metrics, thresholding, and per-model scoring.

Dice and IoU are computed from exact integer pixel counts, so a single
pair's score is a pure function of the two masks with no accumulation
order to worry about. Aggregation is an unweighted mean over classes
within a slice, then an unweighted mean over slices, always folded in
ascending order in float64 so results are bit-reproducible.

Empty-vs-empty is a perfect score by definition: a class absent from
both truth and prediction contributes 1.0 to both metrics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import DipeError
from .parallel import ordered_map, ordered_sum
from .tensor_io import BinaryMaskSet, Manifest, ProbabilityMap

DEFAULT_THRESHOLD = 0.5


def threshold(pmap: ProbabilityMap, value: float = DEFAULT_THRESHOLD) -> BinaryMaskSet:
    """Binarize a probability map: pixels with probability >= value are foreground."""
    return BinaryMaskSet((pmap.values >= value).astype(np.uint8))


def plane_dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice coefficient of two binary planes: 2|a n b| / (|a| + |b|)."""
    size_a = int(np.count_nonzero(a))
    size_b = int(np.count_nonzero(b))
    if size_a == 0 and size_b == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return (2.0 * inter) / (size_a + size_b)


def plane_iou(a: np.ndarray, b: np.ndarray) -> float:
    """IoU of two binary planes: |a n b| / |a u b|."""
    size_a = int(np.count_nonzero(a))
    size_b = int(np.count_nonzero(b))
    if size_a == 0 and size_b == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return inter / (size_a + size_b - inter)


def slice_dice(truth: BinaryMaskSet, prediction: BinaryMaskSet) -> float:
    """Unweighted mean Dice over classes for one slice."""
    if truth.shape != prediction.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {prediction.shape}")
    per_class = [plane_dice(truth.planes[c], prediction.planes[c]) for c in range(truth.classes)]
    return ordered_sum(per_class) / truth.classes


def slice_iou(truth: BinaryMaskSet, prediction: BinaryMaskSet) -> float:
    """Unweighted mean IoU over classes for one slice."""
    if truth.shape != prediction.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {prediction.shape}")
    per_class = [plane_iou(truth.planes[c], prediction.planes[c]) for c in range(truth.classes)]
    return ordered_sum(per_class) / truth.classes


def dataset_dice(truths, predictions) -> float:
    """Mean of per-slice Dice over aligned truth/prediction sequences."""
    if len(truths) != len(predictions):
        raise ValueError("truth and prediction counts differ")
    if not truths:
        raise DipeError("cannot average metrics over zero slices")
    per_slice = [slice_dice(t, p) for t, p in zip(truths, predictions)]
    return ordered_sum(per_slice) / len(per_slice)


def dataset_iou(truths, predictions) -> float:
    """Mean of per-slice IoU over aligned truth/prediction sequences."""
    if len(truths) != len(predictions):
        raise ValueError("truth and prediction counts differ")
    if not truths:
        raise DipeError("cannot average metrics over zero slices")
    per_slice = [slice_iou(t, p) for t, p in zip(truths, predictions)]
    return ordered_sum(per_slice) / len(per_slice)


@dataclass(frozen=True)
class ModelScore:
    """Dataset-level individual accuracy of one model."""

    model_id: str
    name: str
    dice: float
    iou: float


def _score_one_model(manifest: Manifest, threshold_value: float, model_index: int) -> ModelScore:
    dice_vals = []
    iou_vals = []
    for rec in manifest.slices:
        mask = threshold(manifest.load_prediction(model_index, rec.slice_id), threshold_value)
        dice_vals.append(slice_dice(rec.truth, mask))
        iou_vals.append(slice_iou(rec.truth, mask))
    model = manifest.models[model_index]
    n = len(manifest.slices)
    return ModelScore(
        model_id=model.model_id,
        name=model.name,
        dice=ordered_sum(dice_vals) / n,
        iou=ordered_sum(iou_vals) / n,
    )


def score_models(
    manifest: Manifest,
    threshold_value: float = DEFAULT_THRESHOLD,
    threads: int = 1,
) -> list[ModelScore]:
    """Score every model in the pool. Thread count never changes the bits:
    models are scored independently and each model's reduction is sequential."""
    if not manifest.slices:
        raise DipeError("manifest has no included slices to evaluate")
    if not manifest.models:
        raise DipeError("manifest has no models to evaluate")
    worker = partial(_score_one_model, manifest, threshold_value)
    return list(ordered_map(worker, range(manifest.n_models), threads=threads))


def dice_vector(scores: list[ModelScore]) -> list[float]:
    """Individual Dice per model, in pool order."""
    return [s.dice for s in scores]


# ---------------------------------------------------------------------------
# Numeric text rendering (shared by the JSON and CSV outputs)
# ---------------------------------------------------------------------------

def render_float17(x) -> str:
    """Render a float with 17 significant digits (lossless round-trip)."""
    return format(float(x), ".17g")


_FLOAT_MARK = "\x00"
# json.dumps escapes the NUL sentinel, so unwrap the escaped form.
_MARKED_FLOAT = re.compile(r'"\\u0000(.*?)\\u0000"')


def dumps_json17(obj, indent: int = 2) -> str:
    """json.dumps with every float rendered at 17 significant digits."""

    def convert(o):
        if isinstance(o, bool):
            return o
        if isinstance(o, (float, np.floating)):
            return _FLOAT_MARK + render_float17(o) + _FLOAT_MARK
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, dict):
            return {k: convert(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [convert(v) for v in o]
        return o

    return _MARKED_FLOAT.sub(r"\1", json.dumps(convert(obj), indent=indent))
