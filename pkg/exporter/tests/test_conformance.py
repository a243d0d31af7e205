"""Cross-package conformance: files written here, loaded by the toolkit.

These tests import the dipe package; everything else in this suite runs
without it. The two packages share no writer code, so agreement here is
evidence about the format, not about a shared implementation.
"""

import json

import numpy as np
import pytest

import dipe
from conftest import blob_truth
from dipe_export import ModelSpec, SliceSample, export, write_tensor


def echo_zoo(tmp_path, n_slices: int = 4):
    """Models that echo the ground truth as probabilities, plus one rival."""
    truths = [blob_truth(7 + i) for i in range(n_slices)]
    samples = [
        SliceSample(f"s{i}", truths[i].astype(np.float32), truths[i])
        for i in range(n_slices)
    ]
    models = [
        ModelSpec("echo", "echoes the truth", lambda x: x),
        ModelSpec("faded", "echo at lower confidence", lambda x: x * 0.8 + 0.1),
    ]
    return export(models, samples, ["left", "right"], tmp_path)


def test_exported_tree_loads_with_zero_validation_errors(tmp_path):
    manifest = dipe.load_manifest(echo_zoo(tmp_path))
    assert list(manifest.model_ids()) == ["echo", "faded"]
    assert len(manifest.slices) == 4
    for rec in manifest.slices:
        for i in range(2):
            pmap = manifest.load_prediction(i, rec.slice_id)
            assert pmap.values.shape == rec.truth.planes.shape


def test_truth_round_trips_through_the_toolkit_reader(tmp_path):
    manifest = dipe.load_manifest(echo_zoo(tmp_path))
    for i, rec in enumerate(manifest.slices):
        assert np.array_equal(rec.truth.planes, blob_truth(7 + i))


def test_echo_model_scores_a_perfect_dice(tmp_path):
    manifest = dipe.load_manifest(echo_zoo(tmp_path))
    scores = {s.model_id: s for s in dipe.score_models(manifest)}
    assert abs(scores["echo"].dice - 1.0) <= 1e-9
    assert abs(scores["echo"].iou - 1.0) <= 1e-9
    # The faded echo thresholds to the same masks: 0.9 >= 0.5 > 0.1.
    assert abs(scores["faded"].dice - 1.0) <= 1e-9


def test_tensor_bytes_match_the_toolkit_writer(tmp_path):
    rng = np.random.default_rng(31)
    for shape in [(1, 1, 1), (2, 3, 4), (3, 8, 5)]:
        values = rng.random(shape, dtype=np.float32)
        write_tensor(values, tmp_path / "ours.dipe")
        dipe.write_probability_map(dipe.ProbabilityMap(values), tmp_path / "theirs.dipe")
        assert (tmp_path / "ours.dipe").read_bytes() == (tmp_path / "theirs.dipe").read_bytes()


def test_toolkit_cli_consumes_the_exported_dataset(tmp_path, capsys):
    manifest_path = echo_zoo(tmp_path / "zoo")
    from dipe.cli import main as dipe_main

    assert dipe_main(["eval", "--manifest", str(manifest_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["echo"]["dice"] == pytest.approx(1.0, abs=1e-9)

    assert dipe_main(
        [
            "report", "--manifest", str(manifest_path),
            "--strategies", "dipe,topk", "--k", "1..2",
            "--out", str(tmp_path / "report.csv"),
        ]
    ) == 0
    assert (tmp_path / "report.csv").is_file()
