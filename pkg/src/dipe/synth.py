"""Deterministic generator of synthetic validation sets and model zoos.

Stands in for a shelf of trained networks: ground truth is a random
parametric blob per (slice, class), and each model's prediction is the
truth corrupted by two error fields -- one shared by every model in the
same correlation group (which is what makes group-mates agree with each
other) and one private per model (whose rate controls individual
accuracy). A model's binary error set grows monotonically with its
noise_rate under a fixed seed, because the private field is derived by
thresholding one fixed uniform field.

Every random draw comes from a counter-based generator (Philox) keyed by
(seed, purpose, slice, entity, class), so any single artifact can be
regenerated in isolation and whole output directories are byte-identical
across runs. The exact keying and draw order is an external contract,
documented in docs/synth-scheme.md; changing it is a format break.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DipeError
from .tensor_io import (
    Manifest,
    ProbabilityMap,
    encode_rle,
    load_manifest,
    write_probability_map,
    write_rle_csv,
)

DEFAULT_GROUP_FLIP_RATE = 0.05
EMPTY_PLANE_RATE = 0.15

_PURPOSE_TRUTH = 1
_PURPOSE_GROUP = 2
_PURPOSE_NOISE = 3
_PURPOSE_JITTER = 4


@dataclass(frozen=True)
class SynthModel:
    """One synthetic model: private error rate plus its correlation group."""

    noise_rate: float
    correlation_group: int
    model_id: str
    name: str

    def __post_init__(self):
        if not 0.0 <= self.noise_rate < 0.5:
            raise DipeError(
                f"noise_rate must be in [0, 0.5), got {self.noise_rate!r} "
                f"(a model must beat chance)"
            )
        if not 0 <= self.correlation_group < 2**16:
            raise DipeError(f"correlation_group out of range: {self.correlation_group}")
        if not self.model_id:
            raise DipeError("model_id must be non-empty")


@dataclass(frozen=True)
class SynthSpec:
    """Full recipe for one synthetic dataset; JSON-mirrored field for field."""

    seed: int
    slices: int
    classes: int
    height: int
    width: int
    models: tuple[SynthModel, ...]
    group_flip_rate: float = DEFAULT_GROUP_FLIP_RATE

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DipeError(f"seed must fit in 64 bits, got {self.seed}")
        if self.slices < 1:
            raise DipeError("slices must be >= 1")
        if self.slices >= 2**24:
            raise DipeError("slice count exceeds the stream-key budget (2^24)")
        if self.classes < 1 or self.height < 1 or self.width < 1:
            raise DipeError("dims must all be >= 1")
        if self.classes >= 2**16:
            raise DipeError("class count exceeds the stream-key budget (2^16)")
        if not self.models:
            raise DipeError("spec must define at least one model")
        if len(self.models) >= 2**16:
            raise DipeError("model count exceeds the stream-key budget (2^16)")
        ids = [m.model_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise DipeError("model ids must be unique")
        if not 0.0 <= self.group_flip_rate < 0.5:
            raise DipeError(
                f"group_flip_rate must be in [0, 0.5), got {self.group_flip_rate!r}"
            )


def synth_spec_from_dict(doc: dict) -> SynthSpec:
    """Build a SynthSpec from its JSON form; missing model ids default to m<i>."""
    try:
        dims = doc["dims"]
        if len(dims) != 3:
            raise DipeError(f"dims must be [classes, height, width], got {dims}")
        models = []
        for i, entry in enumerate(doc["models"]):
            model_id = str(entry.get("model_id", f"m{i}"))
            models.append(
                SynthModel(
                    noise_rate=float(entry["noise_rate"]),
                    correlation_group=int(entry["correlation_group"]),
                    model_id=model_id,
                    name=str(entry.get("name", model_id)),
                )
            )
        return SynthSpec(
            seed=int(doc["seed"]),
            slices=int(doc["slices"]),
            classes=int(dims[0]),
            height=int(dims[1]),
            width=int(dims[2]),
            models=tuple(models),
            group_flip_rate=float(doc.get("group_flip_rate", DEFAULT_GROUP_FLIP_RATE)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DipeError(f"malformed synth spec: {exc}") from exc


def synth_spec_to_dict(spec: SynthSpec) -> dict:
    return {
        "seed": spec.seed,
        "slices": spec.slices,
        "dims": [spec.classes, spec.height, spec.width],
        "group_flip_rate": spec.group_flip_rate,
        "models": [
            {
                "model_id": m.model_id,
                "name": m.name,
                "noise_rate": m.noise_rate,
                "correlation_group": m.correlation_group,
            }
            for m in spec.models
        ],
    }


def load_synth_spec(path: str | Path) -> SynthSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DipeError(f"{path}: invalid JSON: {exc}") from exc
    return synth_spec_from_dict(doc)


# ---------------------------------------------------------------------------
# Counter-based streams (see docs/synth-scheme.md for the frozen contract)
# ---------------------------------------------------------------------------

def _stream(seed: int, purpose: int, slice_idx: int = 0, entity: int = 0, klass: int = 0):
    tag = (purpose << 56) | (slice_idx << 32) | (entity << 16) | klass
    key = np.array([seed, tag], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _truth_plane(spec: SynthSpec, slice_idx: int, klass: int) -> np.ndarray:
    """One class's ground-truth plane: empty, a rectangle, or an ellipse."""
    rng = _stream(spec.seed, _PURPOSE_TRUTH, slice_idx, 0, klass)
    h, w = spec.height, spec.width
    if rng.random() < EMPTY_PLANE_RATE:
        return np.zeros((h, w), dtype=np.uint8)
    is_rect = rng.random() < 0.5
    cy = int(rng.random() * h)
    cx = int(rng.random() * w)
    ry = 1 + int(rng.random() * max(1, h // 3))
    rx = 1 + int(rng.random() * max(1, w // 3))
    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    if is_rect:
        plane = (np.abs(ys - cy) <= ry) & (np.abs(xs - cx) <= rx)
    else:
        plane = ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0
    return plane.astype(np.uint8)


def _truth_volume(spec: SynthSpec, slice_idx: int) -> np.ndarray:
    return np.stack(
        [_truth_plane(spec, slice_idx, c) for c in range(spec.classes)]
    )


def _group_flips(spec: SynthSpec, slice_idx: int, group: int) -> np.ndarray:
    rng = _stream(spec.seed, _PURPOSE_GROUP, slice_idx, group, 0)
    u = rng.random((spec.classes, spec.height, spec.width))
    return u < spec.group_flip_rate


def _model_flips(spec: SynthSpec, slice_idx: int, model_idx: int) -> np.ndarray:
    rng = _stream(spec.seed, _PURPOSE_NOISE, slice_idx, model_idx, 0)
    u = rng.random((spec.classes, spec.height, spec.width))
    return u < spec.models[model_idx].noise_rate


def _probability_levels(spec: SynthSpec, model_idx: int) -> tuple[float, float]:
    """Per-model (background, foreground) probability levels, jittered so
    maps are strictly inside (0, 1) and stable under the 0.5 threshold."""
    rng = _stream(spec.seed, _PURPOSE_JITTER, 0, model_idx, 0)
    lo = 0.06 + rng.random() * 0.08
    hi = 0.86 + rng.random() * 0.08
    return lo, hi


def _slice_id(slice_idx: int) -> str:
    return f"s{slice_idx:04d}"


def generate(spec: SynthSpec, out_dir: str | Path) -> Manifest:
    """Write a complete dataset under out_dir and return it loaded.

    Layout: ``truth.csv`` (run-length ground truth), ``preds/<model_id>/``
    with one tensor file per slice, and ``manifest.json`` binding them.
    Output is byte-identical for identical specs. Generation is
    single-threaded on purpose: determinism outranks speed at fixture scale.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    class_names = [f"c{c}" for c in range(spec.classes)]

    for m in spec.models:
        (out_dir / "preds" / m.model_id).mkdir(parents=True, exist_ok=True)

    levels = [_probability_levels(spec, i) for i in range(len(spec.models))]
    truth_rows = []
    for s in range(spec.slices):
        sid = _slice_id(s)
        truth = _truth_volume(spec, s)
        for c, class_name in enumerate(class_names):
            truth_rows.append((sid, class_name, encode_rle(truth[c])))
        group_cache: dict[int, np.ndarray] = {}
        for i, model in enumerate(spec.models):
            group = model.correlation_group
            if group not in group_cache:
                group_cache[group] = _group_flips(spec, s, group)
            flips = group_cache[group] | _model_flips(spec, s, i)
            predicted = truth.astype(bool) ^ flips
            lo, hi = levels[i]
            values = np.where(predicted, hi, lo).astype(np.float32)
            write_probability_map(
                ProbabilityMap(values),
                out_dir / "preds" / model.model_id / f"{sid}.dipe",
            )
    write_rle_csv(truth_rows, out_dir / "truth.csv")

    doc = {
        "class_names": class_names,
        "slices": [
            {
                "id": _slice_id(s),
                "height": spec.height,
                "width": spec.width,
                "truth_rle_row_refs": "truth.csv",
            }
            for s in range(spec.slices)
        ],
        "models": [
            {"model_id": m.model_id, "name": m.name, "pred_dir": f"preds/{m.model_id}"}
            for m in spec.models
        ],
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    return load_manifest(manifest_path)
