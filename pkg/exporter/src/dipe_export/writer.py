"""Writers for the dataset formats the dipe toolkit loads.

Implemented from the format definitions alone, with no code shared with
the toolkit, so the two sides genuinely cross-check each other: a byte
accepted here but rejected there (or vice versa) is a conformance bug.

* Tensor files: 16-byte little-endian header -- magic ``DIPE``, u16
  version = 1, u16 class count, u32 height, u32 width -- followed by
  C*H*W float32 probabilities, class-major, row-major per plane.
* RLE CSV: ``id,class,segmentation`` rows; the segmentation cell holds
  space-separated (start, length) pairs over the 1-indexed row-major
  flattened plane, empty cell for an empty mask.
* Manifest JSON: ``class_names``, a slice table, and one prediction
  directory per model.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DIPE"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


def write_tensor(values, destination: str | Path) -> None:
    """Write one slice's (C, H, W) probability volume as a tensor file."""
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"expected a (C, H, W) volume, got shape {arr.shape}")
    c, h, w = arr.shape
    with open(destination, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, c, h, w))
        fh.write(arr.tobytes())


def encode_runs(plane) -> str:
    """Run-length string for a binary plane; scans the flattened pixels."""
    flat = np.asarray(plane).astype(bool).ravel()
    runs = []
    start = None
    for pos, on in enumerate(flat, start=1):
        if on and start is None:
            start = pos
        elif not on and start is not None:
            runs.append((start, pos - start))
            start = None
    if start is not None:
        runs.append((start, len(flat) - start + 1))
    return " ".join(f"{s} {length}" for s, length in runs)


def write_truth_csv(rows, destination: str | Path) -> None:
    """Write (slice_id, class_name, run_string) rows with the fixed header."""
    with open(destination, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["id", "class", "segmentation"])
        out.writerows(rows)


def write_manifest(class_names, slices, models, destination: str | Path) -> Path:
    """Write the manifest binding truth and prediction files together.

    ``slices`` is an iterable of (slice_id, height, width) and ``models``
    of (model_id, name); prediction directories are preds/<model_id>.
    """
    doc = {
        "class_names": list(class_names),
        "slices": [
            {"id": sid, "height": h, "width": w, "truth_rle_row_refs": "truth.csv"}
            for sid, h, w in slices
        ],
        "models": [
            {"model_id": mid, "name": name, "pred_dir": f"preds/{mid}"}
            for mid, name in models
        ],
    }
    destination = Path(destination)
    destination.write_text(json.dumps(doc, indent=2) + "\n")
    return destination
