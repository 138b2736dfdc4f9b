import numpy as np
import pytest

from houndkit.errors import ConfigError
from houndkit.synth import (
    CpTemplate,
    FrequencyPool,
    SynthConfig,
    apply_dfs,
    compose_trace,
    default_freq_pool,
    deform,
    jitter_template,
    make_cp_template,
    make_freq_pool,
    resample_segment,
    single_freq_pool,
    synth_noise_segment,
)


class TestFreqPool:
    def test_default_pool_has_760_entries(self):
        pool = make_freq_pool(5e6, 100e6, 125e3)
        assert len(pool) == 760
        assert pool.frequencies_hz[0] == 5e6
        assert np.allclose(np.diff(pool.frequencies_hz), 125e3)
        assert pool.frequencies_hz[-1] < 100e6

    def test_default_helper(self):
        pool = default_freq_pool()
        assert len(pool) == 760
        assert pool.nominal_hz == 52.5e6

    def test_end_exclusive_rule(self):
        pool = make_freq_pool(1.0, 3.0, 1.0)
        assert pool.frequencies_hz.tolist() == [1.0, 2.0]

    def test_non_divisible_range(self):
        with pytest.raises(ConfigError):
            make_freq_pool(1.0, 2.0, 0.3)

    def test_nominal_must_be_member(self):
        with pytest.raises(ConfigError):
            FrequencyPool(np.array([1.0, 2.0]), 1.5)

    def test_single_freq_pool(self):
        pool = single_freq_pool(42.0)
        assert len(pool) == 1 and pool.nominal_hz == 42.0


class TestTemplate:
    def test_structure_lengths(self):
        tpl = make_cp_template(10, 352, 384, 192)
        assert len(tpl) == 10 * 352 + 384 + 192 == 4096

    def test_inconsistent_lengths_rejected(self):
        with pytest.raises(ConfigError):
            CpTemplate(np.ones(100), round_count=2, round_length=40, prologue_len=10, epilogue_len=5)

    def test_jitter_preserves_structure_and_varies(self):
        tpl = make_cp_template()
        rng = np.random.default_rng(0)
        j1 = jitter_template(tpl, rng)
        j2 = jitter_template(tpl, rng)
        assert len(j1) == len(tpl)
        assert not np.array_equal(j1.waveform, j2.waveform)


class TestResample:
    def test_identity_factor(self):
        seg = np.sin(np.arange(50))
        assert np.array_equal(resample_segment(seg, 1.0), seg)

    def test_double_factor_length(self):
        seg = np.arange(40, dtype=np.float64)
        out = resample_segment(seg, 2.0)
        assert abs(out.size - 80) <= 1
        # linear interpolation oracle at factor 2
        expected = np.interp(np.arange(out.size) / 2.0, np.arange(40), seg)
        assert np.allclose(out, expected)


class TestApplyDfs:
    def test_nominal_only_pool_is_identity(self):
        tpl = make_cp_template()
        pool = single_freq_pool(52.5e6)
        out, sched = apply_dfs(tpl, pool, 8.0, np.random.default_rng(3))
        assert out.size == len(tpl)
        assert np.allclose(out, tpl.waveform)
        assert all(seg.freq_hz == 52.5e6 for seg in sched)

    def test_single_segment_half_frequency(self):
        tpl = make_cp_template()
        pool = FrequencyPool(np.array([26.25e6, 52.5e6]), 52.5e6)
        out, sched = deform(tpl.waveform, np.array([], dtype=np.int64),
                            np.array([26.25e6]), pool.nominal_hz)
        assert abs(out.size - 2 * len(tpl)) <= 1

    def test_two_equal_segments_mixed(self):
        tpl = make_cp_template()
        half = len(tpl) // 2
        out, sched = deform(tpl.waveform, np.array([half]),
                            np.array([26.25e6, 52.5e6]), 52.5e6)
        assert abs(out.size - 1.5 * len(tpl)) <= 1
        assert sched[0].out_len == 2 * half
        assert sched[1].out_len == len(tpl) - half

    def test_mean_segment_count(self):
        tpl = make_cp_template()
        pool = default_freq_pool()
        rng = np.random.default_rng(9)
        ks = [len(apply_dfs(tpl, pool, 8.0, rng)[1]) for _ in range(300)]
        assert abs(np.mean(ks) - 8.0) < 0.5


class TestNoiseSegment:
    def test_zero_length(self):
        assert synth_noise_segment(0, np.random.default_rng(0)).size == 0

    def test_determinism(self):
        a = synth_noise_segment(1000, np.random.default_rng(5))
        b = synth_noise_segment(1000, np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_mean_separated_from_template(self):
        # calibration regression: noise and CP activity live at clearly
        # different mean levels (>= 3 combined standard errors apart)
        noise = synth_noise_segment(100_000, np.random.default_rng(6))
        tpl = make_cp_template().waveform
        se = np.sqrt(noise.var() / noise.size + tpl.var() / tpl.size)
        assert abs(noise.mean() - tpl.mean()) >= 3 * se


def desk_synth_config(n_cps, interleave=True, seed=1, gaps=(3000, 15000)):
    return SynthConfig(
        n_cps=n_cps,
        interleave_noise=interleave,
        noise_gap_range=gaps,
        dfs=default_freq_pool(),
        mean_reconfigs_per_cp=8.0,
        awgn_sigma=0.05,
        seed=seed,
    )


class TestComposeTrace:
    def test_pure_noise(self):
        trace, gt = compose_trace(desk_synth_config(0, gaps=(5000, 5000)), make_cp_template())
        assert len(gt) == 0
        assert len(trace) == 5000

    def test_five_cps_structure(self):
        trace, gt = compose_trace(desk_synth_config(5), make_cp_template())
        assert len(gt) == 5
        assert np.all(np.diff(gt.cp_starts) > 0)
        assert np.all(gt.cp_starts[1:] >= gt.cp_ends[:-1])
        gt.check_within(trace)
        assert gt.cp_starts[0] >= 3000  # leading noise pad

    def test_length_bookkeeping(self):
        cfg = desk_synth_config(4, gaps=(2000, 2000))
        trace, gt = compose_trace(cfg, make_cp_template())
        # every gap is exactly 2000, so total length is fully determined
        assert len(trace) == 5 * 2000 + int(gt.cp_lengths.sum())

    def test_no_interleave_packs_cps_back_to_back(self):
        trace, gt = compose_trace(desk_synth_config(4, interleave=False), make_cp_template())
        assert np.array_equal(gt.cp_starts[1:], gt.cp_ends[:-1])

    def test_determinism_bit_identical(self):
        cfg = desk_synth_config(3, seed=77)
        t1, g1 = compose_trace(cfg, make_cp_template())
        t2, g2 = compose_trace(cfg, make_cp_template())
        assert np.array_equal(t1.samples, t2.samples)
        assert np.array_equal(g1.cp_starts, g2.cp_starts)
        assert np.array_equal(g1.cp_lengths, g2.cp_lengths)

    def test_realized_length_variation(self):
        # the deformation must spread realized lengths (>= 5% CV over 100)
        trace, gt = compose_trace(desk_synth_config(100, interleave=False, seed=8),
                                  make_cp_template())
        cv = gt.cp_lengths.std() / gt.cp_lengths.mean()
        assert cv >= 0.05

    def test_awgn_applied(self):
        quiet = SynthConfig(0, True, (4000, 4000), default_freq_pool(), 8.0, 0.0, 3)
        noisy = SynthConfig(0, True, (4000, 4000), default_freq_pool(), 8.0, 0.05, 3)
        t_quiet, _ = compose_trace(quiet, make_cp_template())
        t_noisy, _ = compose_trace(noisy, make_cp_template())
        diff = t_noisy.samples - t_quiet.samples
        assert 0.04 < diff.std() < 0.06

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            SynthConfig(1, True, (10, 5), default_freq_pool(), 8.0, 0.05, 1)
        with pytest.raises(ConfigError):
            SynthConfig(1, True, (5, 10), default_freq_pool(), 0.5, 0.05, 1)
