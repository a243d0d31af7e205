"""On-disk formats: probability tensors, RLE mask CSVs, and the manifest.

Three file formats tie the pipeline stages together:

* ``.dipe`` tensor files -- a fixed little-endian binary container for one
  slice's per-class foreground probabilities. Layout: 4 magic bytes
  ``DIPE``, u16 format version (=1), u16 class count C, u32 height H,
  u32 width W (16-byte header), then C*H*W float32 values in [0, 1],
  class-major, row-major within each class plane.
* RLE CSVs -- ``id,class,segmentation`` rows; ``segmentation`` is a
  space-separated list of (start, length) pairs over the 1-indexed,
  row-major flattened plane. Empty/absent cell means an empty mask.
* manifest JSON -- binds slice ids, ground-truth RLE references, and the
  per-model prediction directories into one validated dataset.

Readers are pure and reentrant; loaded values are treated as immutable.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    DuplicateModelIdError,
    ManifestError,
    MissingPredictionError,
    RleError,
    TensorFormatError,
    TruncatedFileError,
    ValueRangeError,
    VersionMismatchError,
)

TENSOR_MAGIC = b"DIPE"
TENSOR_VERSION = 1
TENSOR_HEADER = struct.Struct("<4sHHII")
TENSOR_SUFFIX = ".dipe"


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-class foreground probabilities for one slice, shape (C, H, W)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"probability map must be 3-D (C, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"probability map dimensions must be >= 1, got shape {arr.shape}")
        if not np.all((arr >= 0.0) & (arr <= 1.0)):
            bad = arr[~((arr >= 0.0) & (arr <= 1.0))].flat[0]
            raise ValueError(f"probability values must lie in [0, 1], found {bad!r}")
        object.__setattr__(self, "values", arr)

    @property
    def classes(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BinaryMaskSet:
    """Per-class binary masks for one slice, shape (C, H, W), values {0, 1}."""

    planes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.planes, dtype=np.uint8)
        if arr.ndim != 3:
            raise ValueError(f"mask set must be 3-D (C, H, W), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"mask set dimensions must be >= 1, got shape {arr.shape}")
        if not np.all(arr <= 1):
            raise ValueError("mask planes must be binary (0/1)")
        object.__setattr__(self, "planes", arr)

    @property
    def classes(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.planes.shape


# ---------------------------------------------------------------------------
# Binary tensor container
# ---------------------------------------------------------------------------

def write_probability_map(pmap: ProbabilityMap, destination: str | Path) -> None:
    """Write a probability map to ``destination`` in the binary container format.

    ``read_probability_map(write(m))`` reproduces ``m`` bit-exactly.
    """
    header = TENSOR_HEADER.pack(
        TENSOR_MAGIC, TENSOR_VERSION, pmap.classes, pmap.height, pmap.width
    )
    payload = np.ascontiguousarray(pmap.values, dtype="<f4").tobytes()
    Path(destination).write_bytes(header + payload)


def read_tensor_header(source: str | Path) -> tuple[int, int, int]:
    """Read and validate only the 16-byte header; returns (classes, height, width)."""
    with open(source, "rb") as fh:
        head = fh.read(TENSOR_HEADER.size)
    return _parse_header(head, source)


def _parse_header(head: bytes, source: str | Path) -> tuple[int, int, int]:
    if len(head) < TENSOR_HEADER.size:
        raise TruncatedFileError(
            f"{source}: truncated header, file ends at byte {len(head)} "
            f"(need {TENSOR_HEADER.size})"
        )
    magic, version, classes, height, width = TENSOR_HEADER.unpack(head[: TENSOR_HEADER.size])
    if magic != TENSOR_MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r} at byte 0 (expected {TENSOR_MAGIC!r})")
    if version != TENSOR_VERSION:
        raise VersionMismatchError(
            f"{source}: unsupported format version {version} at byte 4 "
            f"(expected {TENSOR_VERSION})"
        )
    if classes < 1 or height < 1 or width < 1:
        raise TensorFormatError(
            f"{source}: dimensions must be >= 1, header declares "
            f"({classes}, {height}, {width})"
        )
    return classes, height, width


def read_probability_map(source: str | Path) -> ProbabilityMap:
    """Read a probability map, validating magic, version, size, and value range."""
    data = Path(source).read_bytes()
    classes, height, width = _parse_header(data, source)
    expected = classes * height * width * 4
    payload = len(data) - TENSOR_HEADER.size
    if payload < expected:
        raise TruncatedFileError(
            f"{source}: truncated payload, file ends at byte {len(data)} "
            f"(need {TENSOR_HEADER.size + expected})"
        )
    if payload > expected:
        raise TensorFormatError(
            f"{source}: {payload - expected} trailing bytes after byte "
            f"{TENSOR_HEADER.size + expected}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=TENSOR_HEADER.size)
    in_range = (values >= 0.0) & (values <= 1.0)
    if not np.all(in_range):
        idx = int(np.argmin(in_range))
        raise ValueRangeError(
            f"{source}: value {values[idx]!r} outside [0, 1] at byte "
            f"{TENSOR_HEADER.size + 4 * idx}"
        )
    return ProbabilityMap(values.reshape(classes, height, width).copy())


# ---------------------------------------------------------------------------
# Run-length encoding
# ---------------------------------------------------------------------------

def decode_rle(encoding: str, height: int, width: int) -> np.ndarray:
    """Decode a run-length string into a (height, width) uint8 plane.

    Runs are (start, length) pairs, 1-indexed over the row-major flattened
    plane, with strictly increasing, non-overlapping (contiguous allowed)
    extents. An empty string decodes to an all-zero plane.
    """
    plane = np.zeros(height * width, dtype=np.uint8)
    tokens = encoding.split()
    if not tokens:
        return plane.reshape(height, width)
    if len(tokens) % 2 != 0:
        raise RleError(f"odd token count {len(tokens)}: runs are (start, length) pairs")

    prev_end = 0  # 1-indexed end of the previous run
    for pair_idx in range(0, len(tokens), 2):
        start = _parse_run_int(tokens, pair_idx)
        length = _parse_run_int(tokens, pair_idx + 1)
        if start <= prev_end:
            raise RleError(
                f"run starting at token {pair_idx} overlaps or does not "
                f"advance (start {start} <= previous end {prev_end})"
            )
        end = start + length - 1
        if end > height * width:
            raise RleError(
                f"run at token {pair_idx} ends at pixel {end}, beyond "
                f"{height}x{width} = {height * width}"
            )
        plane[start - 1 : end] = 1
        prev_end = end
    return plane.reshape(height, width)


def _parse_run_int(tokens: list[str], index: int) -> int:
    try:
        value = int(tokens[index])
    except ValueError:
        raise RleError(f"non-integer token {tokens[index]!r} at token {index}") from None
    if value < 1:
        raise RleError(f"token {index} must be >= 1, got {value}")
    return value


def encode_rle(plane: np.ndarray) -> str:
    """Encode a binary plane as the canonical run-length string.

    Maximal runs, ascending starts; an all-zero plane encodes to "".
    """
    flat = np.asarray(plane, dtype=np.uint8).reshape(-1)
    padded = np.concatenate([[0], flat, [0]])
    edges = np.flatnonzero(padded[1:] != padded[:-1]) + 1
    starts = edges[0::2]
    lengths = edges[1::2] - starts
    return " ".join(f"{s} {l}" for s, l in zip(starts, lengths))


RLE_CSV_HEADER = ["id", "class", "segmentation"]


def write_rle_csv(rows, destination: str | Path) -> None:
    """Write (slice_id, class_name, rle_string) rows to an RLE CSV."""
    with open(destination, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RLE_CSV_HEADER)
        for slice_id, class_name, rle in rows:
            writer.writerow([slice_id, class_name, rle])


def read_rle_csv(source: str | Path) -> dict[tuple[str, str], str]:
    """Read an RLE CSV into a {(slice_id, class_name): rle_string} mapping."""
    table: dict[tuple[str, str], str] = {}
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RLE_CSV_HEADER:
            raise ManifestError(f"{source}: expected header {','.join(RLE_CSV_HEADER)!r}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ManifestError(f"{source}:{line_no}: expected 3 columns, got {len(row)}")
            key = (row[0], row[1])
            if key in table:
                raise ManifestError(f"{source}:{line_no}: duplicate row for {key}")
            table[key] = row[2]
    return table


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SliceRecord:
    slice_id: str
    height: int
    width: int
    truth: BinaryMaskSet


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    name: str
    pred_dir: Path


@dataclass(frozen=True)
class Manifest:
    """A validated dataset: class names, slices with ground truth, model pool."""

    class_names: tuple[str, ...]
    slices: tuple[SliceRecord, ...]
    models: tuple[ModelRecord, ...]

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def prediction_path(self, model_index: int, slice_id: str) -> Path:
        return self.models[model_index].pred_dir / f"{slice_id}{TENSOR_SUFFIX}"

    def load_prediction(self, model_index: int, slice_id: str) -> ProbabilityMap:
        return read_probability_map(self.prediction_path(model_index, slice_id))

    def model_ids(self) -> list[str]:
        return [m.model_id for m in self.models]


def load_manifest(path: str | Path) -> Manifest:
    """Load and fully validate a manifest JSON document.

    Every referenced file must exist and dimension-check against the
    manifest's declared class count and per-slice sizes. Slices marked
    ``"include": false`` are dropped (their files are not required).
    """
    path = Path(path)
    base_dir = path.parent
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc

    for key in ("class_names", "slices", "models"):
        if key not in doc:
            raise ManifestError(f"{path}: missing required key {key!r}")

    class_names = [str(c) for c in doc["class_names"]]
    if not class_names:
        raise ManifestError(f"{path}: class_names must be non-empty")
    if len(set(class_names)) != len(class_names):
        raise ManifestError(f"{path}: class_names contains duplicates")
    n_classes = len(class_names)

    models = []
    seen_ids: set[str] = set()
    for entry in doc["models"]:
        model_id = str(entry["model_id"])
        if model_id in seen_ids:
            raise DuplicateModelIdError(f"{path}: duplicate model_id {model_id!r}")
        seen_ids.add(model_id)
        models.append(
            ModelRecord(
                model_id=model_id,
                name=str(entry.get("name", model_id)),
                pred_dir=base_dir / entry["pred_dir"],
            )
        )

    truth_cache: dict[Path, dict[tuple[str, str], str]] = {}
    slices = []
    seen_slices: set[str] = set()
    for entry in doc["slices"]:
        slice_id = str(entry["id"])
        if not slice_id:
            raise ManifestError(f"{path}: empty slice id")
        if slice_id in seen_slices:
            raise ManifestError(f"{path}: duplicate slice id {slice_id!r}")
        seen_slices.add(slice_id)
        if not entry.get("include", True):
            continue
        height = int(entry["height"])
        width = int(entry["width"])
        if height < 1 or width < 1:
            raise ManifestError(f"{path}: slice {slice_id!r} has non-positive dimensions")
        truth_path = base_dir / entry["truth_rle_row_refs"]
        if truth_path not in truth_cache:
            table = read_rle_csv(truth_path)
            unknown = {cls for (_, cls) in table} - set(class_names)
            if unknown:
                raise ManifestError(
                    f"{truth_path}: unknown class names {sorted(unknown)} "
                    f"(manifest declares {class_names})"
                )
            truth_cache[truth_path] = table
        table = truth_cache[truth_path]
        planes = np.zeros((n_classes, height, width), dtype=np.uint8)
        for c, class_name in enumerate(class_names):
            rle = table.get((slice_id, class_name), "")
            if rle:
                try:
                    planes[c] = decode_rle(rle, height, width)
                except RleError as exc:
                    raise ManifestError(
                        f"{truth_path}: bad run string for ({slice_id!r}, {class_name!r}): {exc}"
                    ) from exc
        slices.append(SliceRecord(slice_id, height, width, BinaryMaskSet(planes)))

    manifest = Manifest(tuple(class_names), tuple(slices), tuple(models))

    for i, model in enumerate(manifest.models):
        for rec in manifest.slices:
            pred = manifest.prediction_path(i, rec.slice_id)
            if not pred.is_file():
                raise MissingPredictionError(
                    f"model {model.model_id!r} has no prediction for slice "
                    f"{rec.slice_id!r} (expected {pred})"
                )
            classes, height, width = read_tensor_header(pred)
            if classes != n_classes or height != rec.height or width != rec.width:
                raise DimensionMismatchError(
                    f"{pred}: tensor is ({classes}, {height}, {width}) but manifest "
                    f"declares ({n_classes}, {rec.height}, {rec.width}) for slice "
                    f"{rec.slice_id!r}"
                )
    return manifest
