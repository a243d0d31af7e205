import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracle
from dipe.errors import (
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
from dipe.tensor_io import (
    BinaryMaskSet,
    ProbabilityMap,
    decode_rle,
    encode_rle,
    load_manifest,
    read_probability_map,
    read_rle_csv,
    read_tensor_header,
    write_probability_map,
    write_rle_csv,
)

# A 1x1x1 map holding 0.5: 16-byte header + one little-endian float32.
GOLDEN_UNIT_FILE = bytes.fromhex("44495045" "0100" "0100" "01000000" "01000000" "0000003f")


def probability_arrays(max_dim=6):
    shapes = st.tuples(
        st.integers(1, 3), st.integers(1, max_dim), st.integers(1, max_dim)
    )
    return shapes.flatmap(
        lambda s: arrays(
            np.float32,
            s,
            elements=st.floats(0.0, 1.0, width=32, allow_nan=False),
        )
    )


def binary_planes(max_dim=8):
    shapes = st.tuples(st.integers(1, max_dim), st.integers(1, max_dim))
    return shapes.flatmap(lambda s: arrays(np.uint8, s, elements=st.integers(0, 1)))


class TestTensorFile:
    def test_unit_map_writes_the_golden_twenty_bytes(self, tmp_path):
        path = tmp_path / "unit.dipe"
        write_probability_map(ProbabilityMap(np.full((1, 1, 1), 0.5, np.float32)), path)
        assert path.read_bytes() == GOLDEN_UNIT_FILE
        assert path.stat().st_size == 20

    def test_golden_bytes_read_back(self, tmp_path):
        path = tmp_path / "unit.dipe"
        path.write_bytes(GOLDEN_UNIT_FILE)
        pmap = read_probability_map(path)
        assert pmap.shape == (1, 1, 1)
        assert pmap.values[0, 0, 0] == np.float32(0.5)

    @given(values=probability_arrays())
    def test_round_trip_is_bit_exact(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("rt") / "map.dipe"
        original = ProbabilityMap(values)
        write_probability_map(original, path)
        loaded = read_probability_map(path)
        assert loaded.values.dtype == np.float32
        assert np.array_equal(
            loaded.values.view(np.uint32), original.values.view(np.uint32)
        )

    def test_header_only_read_matches_full_read(self, tmp_path):
        path = tmp_path / "m.dipe"
        write_probability_map(
            ProbabilityMap(np.zeros((2, 3, 5), np.float32)), path
        )
        assert read_tensor_header(path) == (2, 3, 5)

    def test_bad_magic_names_byte_zero(self, tmp_path):
        path = tmp_path / "m.dipe"
        path.write_bytes(b"JUNK" + GOLDEN_UNIT_FILE[4:])
        with pytest.raises(BadMagicError, match="byte 0"):
            read_probability_map(path)

    def test_unknown_version_names_byte_four(self, tmp_path):
        path = tmp_path / "m.dipe"
        path.write_bytes(GOLDEN_UNIT_FILE[:4] + b"\x02\x00" + GOLDEN_UNIT_FILE[6:])
        with pytest.raises(VersionMismatchError, match="byte 4"):
            read_probability_map(path)

    def test_truncated_header_is_reported(self, tmp_path):
        path = tmp_path / "m.dipe"
        path.write_bytes(GOLDEN_UNIT_FILE[:10])
        with pytest.raises(TruncatedFileError, match="byte 10"):
            read_probability_map(path)

    def test_truncated_payload_is_reported(self, tmp_path):
        path = tmp_path / "m.dipe"
        path.write_bytes(GOLDEN_UNIT_FILE[:-2])
        with pytest.raises(TruncatedFileError, match="byte 18"):
            read_probability_map(path)

    def test_trailing_bytes_are_rejected(self, tmp_path):
        path = tmp_path / "m.dipe"
        path.write_bytes(GOLDEN_UNIT_FILE + b"\x00")
        with pytest.raises(TensorFormatError, match="trailing"):
            read_probability_map(path)

    def test_zero_dimension_is_rejected(self, tmp_path):
        path = tmp_path / "m.dipe"
        # class count 0
        path.write_bytes(GOLDEN_UNIT_FILE[:6] + b"\x00\x00" + GOLDEN_UNIT_FILE[8:])
        with pytest.raises(TensorFormatError, match=">= 1"):
            read_probability_map(path)

    def test_out_of_range_value_names_its_byte_offset(self, tmp_path):
        path = tmp_path / "m.dipe"
        payload = np.array([0.25, 1.5], dtype="<f4").tobytes()
        header = GOLDEN_UNIT_FILE[:8] + (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
        path.write_bytes(header + payload)
        with pytest.raises(ValueRangeError, match="byte 20"):
            read_probability_map(path)

    def test_map_above_one_is_rejected_before_write(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            ProbabilityMap(np.full((1, 1, 1), 1.25, np.float32))

    def test_map_must_be_three_dimensional(self):
        with pytest.raises(ValueError, match="3-D"):
            ProbabilityMap(np.zeros((2, 2), np.float32))

    def test_mask_set_must_be_binary(self):
        with pytest.raises(ValueError, match="binary"):
            BinaryMaskSet(np.full((1, 2, 2), 3, np.uint8))


class TestRle:
    def test_empty_string_is_the_empty_mask(self):
        assert decode_rle("", 3, 4).sum() == 0

    def test_full_plane(self):
        assert np.array_equal(decode_rle("1 4", 2, 2), np.ones((2, 2), np.uint8))

    def test_runs_flatten_row_major(self):
        # pixels 2 and 3 of a 2x2 plane are (row 0, col 1) and (row 1, col 0)
        assert np.array_equal(
            decode_rle("2 2", 2, 2), np.array([[0, 1], [1, 0]], np.uint8)
        )

    def test_encode_is_canonical(self):
        assert encode_rle(np.ones((2, 2), np.uint8)) == "1 4"
        assert encode_rle(np.zeros((2, 2), np.uint8)) == ""
        assert encode_rle(np.array([[0, 1], [1, 0]], np.uint8)) == "2 2"

    @given(plane=binary_planes())
    def test_round_trip(self, plane):
        h, w = plane.shape
        assert np.array_equal(decode_rle(encode_rle(plane), h, w), plane)

    @given(plane=binary_planes())
    def test_decode_agrees_with_reference_decoder(self, plane):
        h, w = plane.shape
        encoding = encode_rle(plane)
        assert decode_rle(encoding, h, w).reshape(-1).tolist() == oracle.decode_rle(
            encoding, h, w
        )

    @pytest.mark.parametrize(
        "encoding, message",
        [
            ("1 2 3", "odd token count"),
            ("1 x", "token 1"),
            ("0 3", "token 0"),
            ("2 0", "token 1"),
            ("-1 2", "token 0"),
            ("1 3 2 2", "overlaps"),
            ("3 1 1 1", "advance"),
            ("4 2", "beyond"),
        ],
    )
    def test_malformed_runs_name_the_bad_token(self, encoding, message):
        with pytest.raises(RleError, match=message):
            decode_rle(encoding, 2, 2)

    def test_contiguous_runs_are_allowed(self):
        assert np.array_equal(
            decode_rle("1 2 3 2", 2, 2), np.ones((2, 2), np.uint8)
        )


class TestRleCsv:
    def test_round_trip(self, tmp_path):
        rows = [("s0", "c0", "1 4"), ("s0", "c1", ""), ("s1", "c0", "2 2")]
        path = tmp_path / "t.csv"
        write_rle_csv(rows, path)
        assert read_rle_csv(path) == {
            ("s0", "c0"): "1 4",
            ("s0", "c1"): "",
            ("s1", "c0"): "2 2",
        }

    def test_wrong_header_is_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("id,klass,segmentation\n")
        with pytest.raises(ManifestError, match="header"):
            read_rle_csv(path)

    def test_duplicate_rows_are_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("id,class,segmentation\ns0,c0,1 1\ns0,c0,2 1\n")
        with pytest.raises(ManifestError, match="duplicate"):
            read_rle_csv(path)


class TestManifest:
    def truth(self):
        return {"s0": np.array([[[1, 0], [0, 0]]]), "s1": np.array([[[0, 0], [0, 1]]])}

    def preds(self, shape=(1, 2, 2)):
        return {
            "a": {"s0": np.full(shape, 0.9), "s1": np.full(shape, 0.1)},
            "b": {"s0": np.full(shape, 0.2), "s1": np.full(shape, 0.8)},
        }

    def test_valid_dataset_loads(self, make_dataset):
        manifest = load_manifest(make_dataset(self.truth(), self.preds()))
        assert manifest.model_ids() == ["a", "b"]
        assert [s.slice_id for s in manifest.slices] == ["s0", "s1"]
        assert manifest.slices[0].truth.planes[0, 0, 0] == 1
        assert manifest.load_prediction(0, "s0").values[0, 0, 0] == np.float32(0.9)

    def test_missing_prediction_names_model_and_slice(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        (path.parent / "preds" / "b" / "s1.dipe").unlink()
        with pytest.raises(MissingPredictionError, match="'b'.*'s1'"):
            load_manifest(path)

    def test_dimension_mismatch_names_both_shapes(self, make_dataset, tmp_path):
        path = make_dataset(self.truth(), self.preds())
        write_probability_map(
            ProbabilityMap(np.zeros((1, 3, 3), np.float32)),
            path.parent / "preds" / "a" / "s0.dipe",
        )
        with pytest.raises(DimensionMismatchError, match=r"\(1, 3, 3\).*\(1, 2, 2\)"):
            load_manifest(path)

    def test_class_count_mismatch_is_a_dimension_error(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        write_probability_map(
            ProbabilityMap(np.zeros((2, 2, 2), np.float32)),
            path.parent / "preds" / "a" / "s0.dipe",
        )
        with pytest.raises(DimensionMismatchError):
            load_manifest(path)

    def test_duplicate_model_id_is_rejected(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        doc = json.loads(path.read_text())
        doc["models"].append(doc["models"][0])
        path.write_text(json.dumps(doc))
        with pytest.raises(DuplicateModelIdError, match="'a'"):
            load_manifest(path)

    def test_duplicate_slice_id_is_rejected(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        doc = json.loads(path.read_text())
        doc["slices"].append(doc["slices"][0])
        path.write_text(json.dumps(doc))
        with pytest.raises(ManifestError, match="duplicate slice"):
            load_manifest(path)

    def test_unknown_truth_class_is_rejected(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        csv_path = path.parent / "truth.csv"
        csv_path.write_text(csv_path.read_text() + "s0,ghost,1 1\n")
        with pytest.raises(ManifestError, match="ghost"):
            load_manifest(path)

    def test_excluded_slice_is_dropped_without_checking_its_files(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        (path.parent / "preds" / "a" / "s1.dipe").unlink()
        doc = json.loads(path.read_text())
        doc["slices"][1]["include"] = False
        path.write_text(json.dumps(doc))
        manifest = load_manifest(path)
        assert [s.slice_id for s in manifest.slices] == ["s0"]

    def test_slices_may_have_different_sizes(self, make_dataset):
        truths = {
            "s0": np.array([[[1, 0], [0, 0]]]),
            "s1": np.zeros((1, 3, 4), np.uint8),
        }
        models = {
            "a": {"s0": np.full((1, 2, 2), 0.7), "s1": np.full((1, 3, 4), 0.7)},
        }
        manifest = load_manifest(make_dataset(truths, models))
        assert (manifest.slices[0].height, manifest.slices[0].width) == (2, 2)
        assert (manifest.slices[1].height, manifest.slices[1].width) == (3, 4)

    def test_absent_truth_rows_decode_to_empty_planes(self, make_dataset):
        path = make_dataset(self.truth(), self.preds())
        csv_path = path.parent / "truth.csv"
        lines = [
            line
            for line in csv_path.read_text().splitlines()
            if not line.startswith("s1")
        ]
        csv_path.write_text("\n".join(lines) + "\n")
        manifest = load_manifest(path)
        assert manifest.slices[1].truth.planes.sum() == 0

    def test_missing_key_is_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"class_names": ["c0"], "slices": []}))
        with pytest.raises(ManifestError, match="models"):
            load_manifest(path)

    def test_invalid_json_is_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{nope")
        with pytest.raises(ManifestError, match="invalid JSON"):
            load_manifest(path)
