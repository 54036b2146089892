import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deconfound import data
from deconfound.errors import (
    DegenerateDataError,
    FormatError,
    JoinError,
    ValidationError,
)


def write_labels_text(path, rows, header="id,y,t"):
    lines = [header] + rows
    path.write_text("\n".join(lines) + "\n")


class TestRepresentationFile:
    def test_round_trip_identity_2x2(self, tmp_path):
        p = tmp_path / "r.bin"
        m = np.eye(2, dtype=np.float32)
        data.write_representations(m, p)
        back = data.read_representations(p)
        assert back.dtype == np.float64
        np.testing.assert_array_equal(back, m.astype(np.float64))

    def test_half_payload_bytes_match_independent_encoder(self, tmp_path):
        p = tmp_path / "r.bin"
        data.write_representations(np.array([[0.5]]), p)
        raw = p.read_bytes()
        header_len = struct.calcsize("<6sIQQB")
        assert raw[header_len:] == struct.pack("<f", 0.5)

    def test_header_fields(self, tmp_path):
        p = tmp_path / "r.bin"
        data.write_representations(np.zeros((3, 4)), p)
        magic, version, n, d_r, dtype_code = struct.unpack(
            "<6sIQQB", p.read_bytes()[: struct.calcsize("<6sIQQB")]
        )
        assert magic == b"GPIR1\0"
        assert version == 1
        assert (n, d_r) == (3, 4)
        assert dtype_code == 0

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            data.write_representations(np.array([[np.nan]]), tmp_path / "r.bin")

    def test_bad_magic_is_format_error(self, tmp_path):
        p = tmp_path / "r.bin"
        data.write_representations(np.zeros((2, 2)), p)
        raw = bytearray(p.read_bytes())
        raw[0] = ord("X")
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            data.read_representations(p)

    def test_truncated_payload_is_format_error(self, tmp_path):
        p = tmp_path / "r.bin"
        data.write_representations(np.zeros((2, 2)), p)
        p.write_bytes(p.read_bytes()[:-2])
        with pytest.raises(FormatError):
            data.read_representations(p)

    def test_f64_payload_accepted(self, tmp_path):
        p = tmp_path / "r.bin"
        m = np.array([[1.25, -3.5]])
        data.write_representations(m, p, dtype="f64")
        np.testing.assert_array_equal(data.read_representations(p), m)

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(1, 6),
        d=st.integers(1, 5),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, n, d, seed):
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((n, d)).astype(np.float32)
        p = tmp_path_factory.mktemp("rt") / "r.bin"
        data.write_representations(m, p)
        np.testing.assert_array_equal(data.read_representations(p), m.astype(np.float64))


class TestLoadDataset:
    def make_pair(self, tmp_path, matrix, label_rows, header="id,y,t"):
        rp = tmp_path / "r.bin"
        lp = tmp_path / "l.csv"
        data.write_representations(matrix, rp)
        write_labels_text(lp, label_rows, header)
        return rp, lp

    def test_three_row_f32_join(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.arange(12, dtype=np.float32).reshape(3, 4),
            ["a,1.0,1", "b,2.0,0", "c,3.0,1"],
        )
        ds = data.load_dataset(rp, lp)
        assert ds.n == 3 and ds.d_R == 4
        assert ds.ids == ("a", "b", "c")
        assert not ds.has_perceived

    def test_order_follows_representation_file(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.array([[1.0], [2.0]], dtype=np.float32),
            ["x,5.0,1", "y,6.0,0"],
        )
        ds = data.load_dataset(rp, lp)
        assert ds.observations[0].id == "x"
        assert float(ds.observations[0].r[0]) == 1.0

    def test_nonbinary_t_names_offending_id(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.zeros((2, 2), dtype=np.float32),
            ["a,1.0,1", "bad-row,2.0,2"],
        )
        with pytest.raises(ValidationError, match="bad-row"):
            data.load_dataset(rp, lp)

    def test_single_arm_degenerate(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.zeros((2, 2), dtype=np.float32),
            ["a,1.0,1", "b,2.0,1"],
        )
        with pytest.raises(DegenerateDataError):
            data.load_dataset(rp, lp)

    def test_duplicate_id_is_join_error(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.zeros((2, 2), dtype=np.float32),
            ["a,1.0,1", "a,2.0,0"],
        )
        with pytest.raises(JoinError):
            data.load_dataset(rp, lp)

    def test_row_count_mismatch_is_join_error(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.zeros((3, 2), dtype=np.float32),
            ["a,1.0,1", "b,2.0,0"],
        )
        with pytest.raises(JoinError):
            data.load_dataset(rp, lp)

    def test_perceived_column(self, tmp_path):
        rp, lp = self.make_pair(
            tmp_path, np.zeros((2, 2), dtype=np.float32),
            ["a,1.0,1,1", "b,2.0,0,0"], header="id,y,t,t_tilde",
        )
        ds = data.load_dataset(rp, lp)
        assert ds.has_perceived
        assert ds.observations[0].t_tilde == 1


class TestDatasetValidation:
    def test_nonfinite_y_rejected(self):
        with pytest.raises(ValidationError):
            data.Dataset(ids=("a", "b"), y=np.array([np.inf, 0.0]),
                         t=np.array([0, 1]), R=np.zeros((2, 2)))

    def test_subset_preserves_rows(self):
        ds = data.Dataset(ids=("a", "b", "c"), y=np.array([1.0, 2.0, 3.0]),
                          t=np.array([0, 1, 1]), R=np.arange(6.0).reshape(3, 2))
        sub = ds.subset(np.array([2, 0]))
        assert sub.ids == ("c", "a")
        np.testing.assert_array_equal(sub.y, [3.0, 1.0])
