"""Run inference callables over a dataset and write a loadable directory.

Models are opaque: anything callable that maps a sample's input to a
(C, H, W) probability array. Inference runs sequentially model by model;
batching, devices, and checkpoint loading are the callable's business.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .writer import encode_runs, write_manifest, write_tensor, write_truth_csv


class ExportError(Exception):
    """Invalid model output or dataset; the export did not complete."""


class ClampWarning(UserWarning):
    """A model produced values outside [0, 1] that were clamped."""


@dataclass(frozen=True)
class ModelSpec:
    """One model to export: stable id, display name, inference callable."""

    model_id: str
    name: str
    infer: object

    def __post_init__(self):
        if not self.model_id:
            raise ExportError("model_id must be non-empty")
        if not callable(self.infer):
            raise ExportError(f"model {self.model_id!r}: infer is not callable")


@dataclass(frozen=True)
class SliceSample:
    """One validation slice: id, the model input, and binary ground truth."""

    slice_id: str
    x: object
    truth: np.ndarray

    def __post_init__(self):
        if not self.slice_id:
            raise ExportError("slice_id must be non-empty")
        truth = np.asarray(self.truth)
        if truth.ndim != 3:
            raise ExportError(
                f"slice {self.slice_id!r}: truth must be (C, H, W), got shape {truth.shape}"
            )
        if not np.isin(truth, (0, 1)).all():
            raise ExportError(f"slice {self.slice_id!r}: truth must be 0/1 valued")
        object.__setattr__(self, "truth", truth.astype(np.uint8))


def _normalize_models(models) -> list[ModelSpec]:
    specs = []
    for entry in models:
        if isinstance(entry, ModelSpec):
            specs.append(entry)
        elif len(entry) == 3:
            specs.append(ModelSpec(str(entry[0]), str(entry[1]), entry[2]))
        elif len(entry) == 2:
            specs.append(ModelSpec(str(entry[0]), str(entry[0]), entry[1]))
        else:
            raise ExportError(f"cannot read model entry {entry!r}")
    if not specs:
        raise ExportError("no models to export")
    ids = [m.model_id for m in specs]
    if len(set(ids)) != len(ids):
        raise ExportError("model ids must be unique")
    return specs


def _normalize_samples(dataset, n_classes: int) -> list[SliceSample]:
    samples = []
    for entry in dataset:
        sample = entry if isinstance(entry, SliceSample) else SliceSample(*entry)
        if sample.truth.shape[0] != n_classes:
            raise ExportError(
                f"slice {sample.slice_id!r}: truth has {sample.truth.shape[0]} "
                f"classes, expected {n_classes}"
            )
        samples.append(sample)
    if not samples:
        raise ExportError("no slices to export")
    ids = [s.slice_id for s in samples]
    if len(set(ids)) != len(ids):
        raise ExportError("slice ids must be unique")
    return samples


def export(models, dataset, class_names, out_dir: str | Path) -> Path:
    """Write predictions plus ground truth under out_dir; return the manifest path.

    Every callable must return a (C, H, W) probability volume matching
    the slice's truth dimensions. Out-of-range values are clamped to
    [0, 1] with a ClampWarning per offending model. Shape or non-finite
    failures are collected across all slices and reported together; no
    manifest is written in that case, so a partial tree never loads.
    """
    class_names = [str(c) for c in class_names]
    if not class_names:
        raise ExportError("class_names must be non-empty")
    specs = _normalize_models(models)
    samples = _normalize_samples(dataset, len(class_names))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    truth_rows = []
    for sample in samples:
        for c, class_name in enumerate(class_names):
            truth_rows.append((sample.slice_id, class_name, encode_runs(sample.truth[c])))
    write_truth_csv(truth_rows, out_dir / "truth.csv")

    failures = []
    for spec in specs:
        pred_dir = out_dir / "preds" / spec.model_id
        pred_dir.mkdir(parents=True, exist_ok=True)
        clamped_slices = 0
        for sample in samples:
            values = np.asarray(spec.infer(sample.x), dtype=np.float32)
            if values.shape != sample.truth.shape:
                failures.append(
                    f"model {spec.model_id!r}, slice {sample.slice_id!r}: "
                    f"output shape {values.shape}, expected {sample.truth.shape}"
                )
                continue
            if not np.isfinite(values).all():
                failures.append(
                    f"model {spec.model_id!r}, slice {sample.slice_id!r}: "
                    f"output contains non-finite values"
                )
                continue
            if values.min() < 0.0 or values.max() > 1.0:
                clamped_slices += 1
                values = np.clip(values, 0.0, 1.0)
            write_tensor(values, pred_dir / f"{sample.slice_id}.dipe")
        if clamped_slices:
            warnings.warn(
                f"model {spec.model_id!r}: clamped out-of-range probabilities "
                f"on {clamped_slices} of {len(samples)} slices",
                ClampWarning,
                stacklevel=2,
            )
    if failures:
        raise ExportError(
            "export failed on {} slice(s):\n{}".format(len(failures), "\n".join(failures))
        )

    return write_manifest(
        class_names,
        [(s.slice_id, s.truth.shape[1], s.truth.shape[2]) for s in samples],
        [(m.model_id, m.name) for m in specs],
        out_dir / "manifest.json",
    )
