import json
import textwrap

import numpy as np
import pytest


@pytest.fixture()
def user_module(tmp_path):
    """Write a stub user module plus a config JSON pointing at it.

    Module names must be unique per test: importlib caches by name for
    the life of the process.
    """

    def build(name: str, body: str) -> str:
        (tmp_path / f"{name}.py").write_text(textwrap.dedent(body))
        config = tmp_path / f"{name}.json"
        config.write_text(json.dumps({"module": name, "search_path": ["."]}))
        return str(config)

    return build


def blob_truth(seed: int, classes: int = 2, height: int = 6, width: int = 8) -> np.ndarray:
    """Small deterministic ground truth with empty and non-empty planes."""
    rng = np.random.default_rng(seed)
    truth = np.zeros((classes, height, width), dtype=np.uint8)
    for c in range(classes):
        if rng.random() < 0.25:
            continue
        y, x = rng.integers(0, height), rng.integers(0, width)
        truth[c, max(0, y - 2) : y + 2, max(0, x - 3) : x + 3] = 1
    return truth
