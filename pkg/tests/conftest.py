import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dipe import generate, load_manifest, load_synth_spec
from dipe.tensor_io import ProbabilityMap, write_probability_map, write_rle_csv
from dipe.tensor_io import encode_rle

settings.register_profile(
    "dipe",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("dipe")

FIXTURE_DIR = Path(__file__).parent / "fixtures"
GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def zoo9(tmp_path_factory):
    """The shipped 9-model fixture, regenerated from its frozen spec."""
    out = tmp_path_factory.mktemp("zoo9")
    spec = load_synth_spec(FIXTURE_DIR / "zoo9.json")
    return generate(spec, out)


@pytest.fixture
def make_dataset(tmp_path):
    """Build a dataset from explicit arrays and return its manifest path.

    truths: {slice_id: (C, H, W) 0/1 array}; models: {model_id: {slice_id:
    (C, H, W) probability array}}. Class names default to c0..c<C-1>.
    """

    def build(truths, models, class_names=None, root=None):
        root = Path(root) if root else tmp_path / "ds"
        root.mkdir(parents=True, exist_ok=True)
        first = next(iter(truths.values()))
        n_classes = np.asarray(first).shape[0]
        if class_names is None:
            class_names = [f"c{i}" for i in range(n_classes)]

        rows = []
        for sid in truths:
            planes = np.asarray(truths[sid], dtype=np.uint8)
            for c, name in enumerate(class_names):
                rows.append((sid, name, encode_rle(planes[c])))
        write_rle_csv(rows, root / "truth.csv")

        for model_id, preds in models.items():
            mdir = root / "preds" / model_id
            mdir.mkdir(parents=True, exist_ok=True)
            for sid, values in preds.items():
                write_probability_map(
                    ProbabilityMap(np.asarray(values, dtype=np.float32)),
                    mdir / f"{sid}.dipe",
                )

        doc = {
            "class_names": list(class_names),
            "slices": [
                {
                    "id": sid,
                    "height": int(np.asarray(t).shape[1]),
                    "width": int(np.asarray(t).shape[2]),
                    "truth_rle_row_refs": "truth.csv",
                }
                for sid, t in truths.items()
            ],
            "models": [
                {"model_id": m, "name": m, "pred_dir": f"preds/{m}"} for m in models
            ],
        }
        path = root / "manifest.json"
        path.write_text(json.dumps(doc, indent=2))
        return path

    return build


@pytest.fixture
def load_dataset(make_dataset):
    """Like make_dataset but returns the loaded Manifest."""

    def build(truths, models, class_names=None, root=None):
        return load_manifest(make_dataset(truths, models, class_names, root))

    return build
