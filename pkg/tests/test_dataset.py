import numpy as np
import pytest

from houndkit.dataset import (
    SPLIT_NAMES,
    build_dataset,
    label_cipher_trace,
    load_dataset,
    sample_noise_windows,
    save_dataset,
)
from houndkit.errors import FormatVersionError
from houndkit.trace import GroundTruth, Trace, WindowLabel


def make_trace(length, tid="t", seed=0):
    rng = np.random.default_rng(seed)
    return Trace(rng.standard_normal(length), 1e6, tid)


class TestLabelCipherTrace:
    def test_one_start_one_spare(self):
        tr = make_trace(40)
        windows = label_cipher_trace(tr, cp_start=0, cp_len=25, n=10)
        labels = [w.label for w in windows]
        assert labels == [WindowLabel.START, WindowLabel.SPARE]
        assert windows[1].origin == ("t", 10)

    def test_exact_fit_start_only(self):
        tr = make_trace(32)
        windows = label_cipher_trace(tr, 4, 10, 10)
        assert [w.label for w in windows] == [WindowLabel.START]
        assert windows[0].origin == ("t", 4)

    def test_exact_tiling(self):
        tr = make_trace(100)
        windows = label_cipher_trace(tr, 7, 30, 10)
        assert [w.label for w in windows] == [WindowLabel.START, WindowLabel.SPARE, WindowLabel.SPARE]
        assert [w.origin[1] for w in windows] == [7, 17, 27]

    def test_window_longer_than_cp(self):
        with pytest.raises(ValueError):
            label_cipher_trace(make_trace(100), 0, 9, 10)

    def test_windows_stay_inside_cp(self):
        tr = make_trace(200)
        for w in label_cipher_trace(tr, 50, 77, 10):
            off = w.origin[1]
            assert 50 <= off and off + 10 <= 50 + 77


class TestSampleNoiseWindows:
    def test_zero_requested(self):
        assert sample_noise_windows(make_trace(100), 10, 0, np.random.default_rng(0)) == []

    def test_single_position_trace(self):
        windows = sample_noise_windows(make_trace(10), 10, 5, np.random.default_rng(0))
        assert all(w.origin[1] == 0 for w in windows)

    def test_deterministic_offsets(self):
        tr = make_trace(500)
        a = sample_noise_windows(tr, 16, 20, np.random.default_rng(42))
        b = sample_noise_windows(tr, 16, 20, np.random.default_rng(42))
        assert [w.origin for w in a] == [w.origin for w in b]

    def test_trace_too_short(self):
        with pytest.raises(ValueError):
            sample_noise_windows(make_trace(5), 10, 1, np.random.default_rng(0))


def build_case(n_cps=100, cp_len=100, n=10, seed=3):
    """Cipher trace with evenly spaced CPs of cp_len, plus a noise trace."""
    spacing = cp_len + 20
    total = n_cps * spacing + 50
    tr = make_trace(total, "cipher", seed)
    starts = np.arange(n_cps) * spacing + 10
    gt = GroundTruth(starts, np.full(n_cps, cp_len))
    noise = make_trace(5000, "noise", seed + 1)
    return tr, gt, noise


class TestBuildDataset:
    def test_balanced_to_minority(self):
        # 100 CPs of length 10n: 1 start + 9 spare each -> 100 per class
        tr, gt, noise = build_case(100, 100, 10)
        ds = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(0))
        assert len(ds) == 300
        assert ds.class_counts().tolist() == [100, 100, 100]

    def test_split_sizes_and_stratification(self):
        tr, gt, noise = build_case(100, 100, 10)
        ds = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(0))
        assert [len(ds.splits[s]) for s in SPLIT_NAMES] == [240, 30, 30]
        for split in SPLIT_NAMES:
            counts = ds.class_counts(split)
            assert counts.max() - counts.min() <= 1

    def test_deterministic(self):
        tr, gt, noise = build_case(40, 100, 10)
        d1 = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(9))
        d2 = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(9))
        assert np.array_equal(d1.windows, d2.windows)
        assert np.array_equal(d1.labels, d2.labels)
        assert all(np.array_equal(d1.splits[s], d2.splits[s]) for s in SPLIT_NAMES)

    def test_no_window_crosses_cp_boundary(self):
        tr, gt, noise = build_case(30, 95, 10)
        ds = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(1))
        cp_ranges = list(zip(gt.cp_starts, gt.cp_starts + gt.cp_lengths))
        for (tid, off), label in zip(ds.origins, ds.labels):
            if tid == "cipher":
                assert any(lo <= off and off + 10 <= hi for lo, hi in cp_ranges)

    def test_requires_cp(self):
        noise = make_trace(100, "n")
        with pytest.raises(ValueError):
            build_dataset([], noise, 10, np.random.default_rng(0))

    def test_spare_free_input_rejected(self):
        # CPs exactly one window long yield no spare class at all
        tr, gt, noise = build_case(5, 10, 10)
        with pytest.raises(ValueError):
            build_dataset([(tr, gt)], noise, 10, np.random.default_rng(0))


class TestWdsRoundtrip:
    def test_roundtrip(self, tmp_path):
        tr, gt, noise = build_case(20, 100, 10)
        ds = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(4))
        paths = save_dataset(ds, tmp_path / "ds")
        assert [p.name for p in paths] == ["ds.json", "ds.windows.f32", "ds.labels.u8"]
        loaded = load_dataset(tmp_path / "ds")
        assert loaded.n == 10
        assert np.array_equal(loaded.labels, ds.labels)
        assert np.allclose(loaded.windows, ds.windows.astype(np.float32))
        assert all(np.array_equal(loaded.splits[s], ds.splits[s]) for s in SPLIT_NAMES)

    def test_format_check(self, tmp_path):
        tr, gt, noise = build_case(20, 100, 10)
        ds = build_dataset([(tr, gt)], noise, 10, np.random.default_rng(4))
        save_dataset(ds, tmp_path / "ds")
        bad = (tmp_path / "ds.json").read_text().replace("wds-v1", "wds-v0")
        (tmp_path / "ds.json").write_text(bad)
        with pytest.raises(FormatVersionError):
            load_dataset(tmp_path / "ds")
