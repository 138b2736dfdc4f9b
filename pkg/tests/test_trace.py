import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from houndkit.errors import BoundsError, FormatVersionError, MissingInputError
from houndkit.trace import (
    GroundTruth,
    LabeledWindow,
    Trace,
    WindowLabel,
    extract_window,
    load_trace,
    save_trace,
    standardize_rows,
    standardize_window,
)


def make_trace(samples, rate=1e6, tid="t"):
    return Trace(np.asarray(samples, dtype=np.float64), rate, tid)


class TestTraceType:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            make_trace([])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            make_trace([1.0, np.nan, 2.0])

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            make_trace([1.0, 2.0], rate=0.0)

    def test_samples_immutable(self):
        tr = make_trace([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            tr.samples[0] = 5.0


class TestGroundTruth:
    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            GroundTruth(np.array([0, 5]), np.array([6, 3]))

    def test_non_ascending_rejected(self):
        with pytest.raises(ValueError):
            GroundTruth(np.array([5, 5]), np.array([2, 2]))

    def test_empty_ok(self):
        gt = GroundTruth(np.array([], dtype=np.int64), np.array([], dtype=np.int64))
        assert len(gt) == 0

    def test_check_within(self):
        gt = GroundTruth(np.array([0]), np.array([10]))
        gt.check_within(make_trace(np.zeros(10) + 1.0))
        with pytest.raises(ValueError):
            gt.check_within(make_trace(np.ones(9)))


class TestExtractWindow:
    def test_simple_slice(self):
        tr = make_trace([1, 2, 3, 4, 5])
        assert extract_window(tr, 1, 3).tolist() == [2, 3, 4]

    def test_whole_trace(self):
        tr = make_trace([1, 2, 3, 4, 5])
        assert extract_window(tr, 0, 5).tolist() == [1, 2, 3, 4, 5]

    def test_out_of_range(self):
        tr = make_trace(np.ones(100), tid="trace-7")
        with pytest.raises(BoundsError, match="trace-7") as exc:
            extract_window(tr, 95, 10)
        assert "95" in str(exc.value)


class TestStandardize:
    def test_constant_window_maps_to_zeros(self):
        assert standardize_window(np.array([1.0, 1.0, 1.0, 1.0])).tolist() == [0, 0, 0, 0]

    def test_two_point_window(self):
        # mean 1, population sigma 1
        assert standardize_window(np.array([0.0, 2.0])).tolist() == [-1.0, 1.0]

    def test_too_short(self):
        with pytest.raises(ValueError):
            standardize_window(np.array([1.0]))

    @settings(deadline=None, max_examples=100)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=64))
    def test_moments_and_idempotence(self, values):
        w = np.asarray(values)
        out = standardize_window(w)
        if w.std() >= 1e-6:
            assert abs(out.mean()) < 1e-9
            assert abs(out.std() - 1.0) < 1e-6
        twice = standardize_window(out)
        assert np.allclose(twice, out, atol=1e-9)

    def test_rows_matches_per_window(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((10, 16))
        x[3] = 2.5  # constant row
        rows = standardize_rows(x)
        for i in range(10):
            assert np.allclose(rows[i], standardize_window(x[i]))


def test_windowing_reconstructs_prefix():
    rng = np.random.default_rng(1)
    tr = make_trace(rng.standard_normal(103))
    n = 10
    windows = [extract_window(tr, i * n, n) for i in range(len(tr) // n)]
    assert np.array_equal(np.concatenate(windows), tr.samples[: (len(tr) // n) * n])


class TestLabeledWindow:
    def test_label_coercion(self):
        lw = LabeledWindow(np.ones(4), 2, ("t", 0))
        assert lw.label is WindowLabel.NOISE

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LabeledWindow(np.array([1.0, np.inf]), WindowLabel.START, ("t", 0))


class TestTrcRoundtrip:
    def test_roundtrip_with_ground_truth(self, tmp_path):
        rng = np.random.default_rng(2)
        samples = rng.standard_normal(1000).astype(np.float32).astype(np.float64)
        tr = Trace(samples, 125e6, "rt")
        gt = GroundTruth(np.array([10, 500]), np.array([100, 200]))
        f32_path, json_path = save_trace(tr, tmp_path / "demo", gt)
        assert f32_path.name == "demo.f32" and json_path.name == "demo.json"
        loaded, gt2 = load_trace(tmp_path / "demo")
        assert np.array_equal(loaded.samples, samples)
        assert loaded.sample_rate_hz == 125e6 and loaded.id == "rt"
        assert gt2 is not None
        assert gt2.cp_starts.tolist() == [10, 500]
        assert gt2.cp_lengths.tolist() == [100, 200]

    def test_little_endian_f32_payload(self, tmp_path):
        tr = Trace(np.array([1.0, -2.0, 0.5]), 1e6, "le")
        f32_path, _ = save_trace(tr, tmp_path / "le")
        raw = f32_path.read_bytes()
        assert raw == np.array([1.0, -2.0, 0.5], dtype="<f4").tobytes()

    def test_ground_truth_optional(self, tmp_path):
        save_trace(make_trace([1, 2, 3]), tmp_path / "nogt")
        _, gt = load_trace(tmp_path / "nogt")
        assert gt is None

    def test_format_field_checked(self, tmp_path):
        save_trace(make_trace([1, 2, 3]), tmp_path / "bad")
        sidecar = tmp_path / "bad.json"
        sidecar.write_text(sidecar.read_text().replace("trc-v1", "trc-v9"))
        with pytest.raises(FormatVersionError):
            load_trace(tmp_path / "bad")

    def test_missing_files(self, tmp_path):
        with pytest.raises(MissingInputError):
            load_trace(tmp_path / "absent")
