"""Seeded synthesis of frequency-scaled crypto-workload power traces.

The generator emits a waveform that alternates general-purpose "noise"
activity with crypto-primitive (CP) executions.  Each CP instance is a
repeated-round template that gets chopped into segments by a simulated
dynamic-frequency-scaling (DFS) actuator: every segment is time-rescaled
by ``nominal_hz / f`` for a frequency ``f`` drawn from the pool, so the
realized CP length varies instance to instance.  Exact ground truth
(start index and realized length of every instance) is recorded while
composing, making the output usable as a labeled oracle.

Everything is driven by a single ``numpy.random.Generator``, so a given
:class:`SynthConfig` reproduces its trace bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError
from .trace import GroundTruth, Trace

#: Sampling rate attached to synthesized traces (samples/second).
SYNTH_SAMPLE_RATE_HZ = 125e6

# Noise generator block parameters.  Activity rides well below the CP level
# so the two regimes stay statistically separate.
_NOISE_IDLE_LEVEL = 0.5
_NOISE_IDLE_DUR = (300, 3000)
_NOISE_ACTIVE_LEVEL = (0.8, 1.5)
_NOISE_ACTIVE_DUR = (500, 5000)
_NOISE_ACTIVE_SIGMA = (0.05, 0.12)
_NOISE_AR_RHO = 0.95
_NOISE_ACTIVE_PROB = 0.55

# CP template shape constants (dimensionless amplitude units).
_CP_BASE_LEVEL = 0.5
_CP_PEAK_LEVEL = 2.7
_CP_RUN_LEVEL = 2.3
_CP_NOTCH_LEVEL = 1.4
_CP_NOTCH_LEN = 24
_CP_RIPPLE_AMP = 0.38
_CP_RIPPLE_PERIOD = 12.0
_CP_ARCH_AMP = 0.15

# Per-instance jitter strengths used by compose_trace.
_JITTER_ROUND_SCALE = 0.05
_JITTER_ROUND_LEVEL = 0.06
_JITTER_SAMPLE = 0.02


@dataclass(frozen=True)
class FrequencyPool:
    """Sorted pool of operating frequencies plus the template's reference
    ("nominal") frequency, which must be one of the pool members."""

    frequencies_hz: np.ndarray
    nominal_hz: float

    def __post_init__(self):
        freqs = np.array(self.frequencies_hz, dtype=np.float64, copy=True)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ConfigError("frequency pool must be a non-empty 1-D sequence")
        if np.any(freqs <= 0) or not np.all(np.isfinite(freqs)):
            raise ConfigError("frequencies must be positive and finite")
        if np.any(np.diff(freqs) <= 0):
            raise ConfigError("frequencies must be strictly ascending (all distinct)")
        if not np.any(np.isclose(freqs, self.nominal_hz, rtol=1e-12, atol=0.0)):
            raise ConfigError(f"nominal_hz {self.nominal_hz} is not a pool member")
        freqs.flags.writeable = False
        object.__setattr__(self, "frequencies_hz", freqs)

    def __len__(self) -> int:
        return self.frequencies_hz.size


def make_freq_pool(f_min_hz: float, f_max_hz: float, step_hz: float,
                   nominal_hz: float | None = None) -> FrequencyPool:
    """Build an evenly spaced pool ``f_min, f_min+step, ...`` covering
    ``[f_min, f_max)``.

    The span must be an integer number of steps (relative tolerance 1e-6);
    the resulting pool has ``(f_max - f_min) / step`` entries, i.e. the top
    endpoint is exclusive, matching a 760-entry pool for 5-100 MHz at
    125 kHz.  ``nominal_hz`` defaults to the median pool member.
    """
    if not (f_min_hz > 0 and f_max_hz > f_min_hz and step_hz > 0):
        raise ConfigError("require 0 < f_min < f_max and step > 0")
    steps = (f_max_hz - f_min_hz) / step_hz
    count = int(round(steps))
    if count < 1 or abs(steps - count) > 1e-6 * max(1.0, steps):
        raise ConfigError(
            f"frequency range {f_min_hz}..{f_max_hz} is not divisible by step {step_hz}"
        )
    freqs = f_min_hz + step_hz * np.arange(count, dtype=np.float64)
    if nominal_hz is None:
        nominal_hz = float(freqs[count // 2])
    return FrequencyPool(freqs, nominal_hz)


def default_freq_pool() -> FrequencyPool:
    """The 760-frequency pool: 5 MHz up to 100 MHz in 125 kHz steps."""
    return make_freq_pool(5e6, 100e6, 125e3)


def single_freq_pool(freq_hz: float) -> FrequencyPool:
    """Degenerate pool for generating undeformed traces (DFS disabled)."""
    return FrequencyPool(np.asarray([freq_hz]), freq_hz)


@dataclass(frozen=True)
class CpTemplate:
    """Synthetic crypto-primitive waveform at the nominal frequency.

    Layout is ``prologue | round_count * round_length | epilogue``: a rising
    power ramp, a repeated round motif (level + fast ripple + boundary
    notch), and a falling ramp.
    """

    waveform: np.ndarray
    round_count: int
    round_length: int
    prologue_len: int
    epilogue_len: int

    def __post_init__(self):
        wf = np.array(self.waveform, dtype=np.float64, copy=True)
        if wf.ndim != 1 or not np.all(np.isfinite(wf)):
            raise ConfigError("template waveform must be finite and 1-D")
        if self.round_count < 1 or self.round_length < 1:
            raise ConfigError("round_count and round_length must be positive")
        if self.prologue_len < 0 or self.epilogue_len < 0:
            raise ConfigError("prologue/epilogue lengths must be non-negative")
        expect = self.round_count * self.round_length + self.prologue_len + self.epilogue_len
        if wf.size != expect:
            raise ConfigError(
                f"waveform length {wf.size} != rounds*round_length + prologue + epilogue = {expect}"
            )
        wf.flags.writeable = False
        object.__setattr__(self, "waveform", wf)

    def __len__(self) -> int:
        return self.waveform.size


def make_cp_template(round_count: int = 10, round_length: int = 352,
                     prologue_len: int = 384, epilogue_len: int = 192) -> CpTemplate:
    """Construct the base CP template.

    The prologue is a clean linear ramp from idle toward peak power (the
    feature that marks a CP start even after heavy time-rescaling), each
    round carries a fast ripple whose period stays inside one classifier
    window across the whole stretch range, and the epilogue ramps back down.
    """
    n_round = round_count * round_length
    idx = np.arange(n_round, dtype=np.float64)
    rounds = (
        _CP_RUN_LEVEL
        + _CP_RIPPLE_AMP * np.sin(2.0 * np.pi * idx / _CP_RIPPLE_PERIOD)
        + _CP_ARCH_AMP * np.sin(np.pi * (idx % round_length) / round_length)
    )
    notch = min(_CP_NOTCH_LEN, round_length)
    for r in range(round_count):
        lo = r * round_length
        sl = slice(lo, lo + notch)
        rounds[sl] = _CP_NOTCH_LEVEL + 0.5 * _CP_RIPPLE_AMP * np.sin(
            2.0 * np.pi * idx[sl] / _CP_RIPPLE_PERIOD
        )
    prologue = np.linspace(_CP_BASE_LEVEL, _CP_PEAK_LEVEL, prologue_len)
    epilogue = np.linspace(_CP_RUN_LEVEL, _CP_BASE_LEVEL, epilogue_len)
    waveform = np.concatenate([prologue, rounds, epilogue])
    return CpTemplate(waveform, round_count, round_length, prologue_len, epilogue_len)


def jitter_template(template: CpTemplate, rng: np.random.Generator) -> CpTemplate:
    """Per-instance data-dependent variation: each round gets a small
    amplitude scale and level offset, plus low-amplitude sample noise."""
    wf = template.waveform.copy()
    for r in range(template.round_count):
        lo = template.prologue_len + r * template.round_length
        hi = lo + template.round_length
        scale = 1.0 + _JITTER_ROUND_SCALE * rng.standard_normal()
        offset = _JITTER_ROUND_LEVEL * rng.standard_normal()
        wf[lo:hi] = _CP_RUN_LEVEL + (wf[lo:hi] - _CP_RUN_LEVEL) * scale + offset
    wf += _JITTER_SAMPLE * rng.standard_normal(wf.size)
    return CpTemplate(wf, template.round_count, template.round_length,
                      template.prologue_len, template.epilogue_len)


class DfsSegment(NamedTuple):
    """One constant-frequency stretch of a deformed CP instance."""

    in_start: int
    in_len: int
    freq_hz: float
    out_start: int
    out_len: int


def resample_segment(segment: np.ndarray, factor: float) -> np.ndarray:
    """Time-rescale ``segment`` by ``factor`` with linear interpolation.

    ``factor`` > 1 stretches (slower clock, more samples).  The output
    length is ``round(len * factor)`` (at least one sample); a factor of
    exactly 1 reproduces the input.
    """
    m = segment.size
    if m == 0:
        return segment.copy()
    out_len = max(1, int(round(m * factor)))
    positions = np.arange(out_len, dtype=np.float64) / factor
    return np.interp(positions, np.arange(m, dtype=np.float64), segment)


def deform(waveform: np.ndarray, boundaries: np.ndarray, freqs_hz: np.ndarray,
           nominal_hz: float) -> tuple[np.ndarray, list[DfsSegment]]:
    """Apply an explicit DFS schedule to ``waveform``.

    ``boundaries`` are the interior cut points (sorted, in samples) splitting
    the waveform into ``len(freqs_hz)`` contiguous segments; segment ``i``
    runs at ``freqs_hz[i]`` and is rescaled by ``nominal_hz / freqs_hz[i]``.
    Returns the concatenated deformed waveform and the realized schedule.
    """
    edges = np.concatenate(([0], np.asarray(boundaries, dtype=np.int64), [waveform.size]))
    if edges.size - 1 != len(freqs_hz):
        raise ConfigError("need exactly one frequency per segment")
    if np.any(np.diff(edges) <= 0):
        raise ConfigError("segment boundaries must be strictly increasing interior cuts")
    pieces = []
    schedule = []
    out_pos = 0
    for i, f in enumerate(freqs_hz):
        lo, hi = int(edges[i]), int(edges[i + 1])
        piece = resample_segment(waveform[lo:hi], nominal_hz / float(f))
        schedule.append(DfsSegment(lo, hi - lo, float(f), out_pos, piece.size))
        pieces.append(piece)
        out_pos += piece.size
    return np.concatenate(pieces), schedule


def apply_dfs(template: CpTemplate, pool: FrequencyPool, mean_reconfigs: float,
              rng: np.random.Generator) -> tuple[np.ndarray, list[DfsSegment]]:
    """Deform a CP template with a randomized frequency schedule.

    The segment count is ``1 + Poisson(mean_reconfigs - 1)`` so its
    expectation equals ``mean_reconfigs``; cut points are uniform without
    replacement and each segment's frequency is drawn uniformly from the
    pool.  Deterministic given the generator state.
    """
    if len(template) == 0:
        raise ConfigError("cannot deform an empty template")
    if mean_reconfigs < 1.0:
        raise ConfigError("mean_reconfigs must be >= 1")
    k = 1 + int(rng.poisson(mean_reconfigs - 1.0))
    k = min(k, len(template))
    if k > 1:
        cuts = np.sort(rng.choice(np.arange(1, len(template)), size=k - 1, replace=False))
    else:
        cuts = np.empty(0, dtype=np.int64)
    freqs = pool.frequencies_hz[rng.integers(0, len(pool), size=k)]
    return deform(template.waveform, cuts, freqs, pool.nominal_hz)


def synth_noise_segment(length: int, rng: np.random.Generator) -> np.ndarray:
    """General-purpose "not the CP" activity of the requested length.

    Alternates idle dwell periods with band-limited random-walk bursts
    (an AR(1) process around a drawn activity level).  Deterministic given
    the generator state; ``length`` 0 yields an empty array.
    """
    if length < 0:
        raise ConfigError("length must be >= 0")
    if length == 0:
        return np.zeros(0)
    out = np.empty(length)
    pos = 0
    while pos < length:
        active = rng.random() < _NOISE_ACTIVE_PROB
        if active:
            dur = int(rng.integers(*_NOISE_ACTIVE_DUR))
            level = rng.uniform(*_NOISE_ACTIVE_LEVEL)
            sigma = rng.uniform(*_NOISE_ACTIVE_SIGMA)
            shocks = rng.normal(0.0, sigma, dur)
            block = level + lfilter([1.0], [1.0, -_NOISE_AR_RHO], shocks)
        else:
            dur = int(rng.integers(*_NOISE_IDLE_DUR))
            block = np.full(dur, _NOISE_IDLE_LEVEL)
        take = min(dur, length - pos)
        out[pos : pos + take] = block[:take]
        pos += take
    return out


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one composed trace.  ``noise_gap_range`` bounds the noise
    stretches around CP instances (inclusive).  With ``interleave_noise``
    off, only a leading and trailing pad are emitted and CPs run back to
    back.  ``n_cps`` 0 produces a pure-noise trace one gap long."""

    n_cps: int
    interleave_noise: bool
    noise_gap_range: tuple[int, int]
    dfs: FrequencyPool
    mean_reconfigs_per_cp: float
    awgn_sigma: float
    seed: int

    def __post_init__(self):
        lo, hi = self.noise_gap_range
        if self.n_cps < 0:
            raise ConfigError("n_cps must be >= 0")
        if not (0 <= lo <= hi):
            raise ConfigError("noise_gap_range must satisfy 0 <= min <= max")
        if self.mean_reconfigs_per_cp < 1.0:
            raise ConfigError("mean_reconfigs_per_cp must be >= 1")
        if self.awgn_sigma < 0.0:
            raise ConfigError("awgn_sigma must be >= 0")


def compose_trace(config: SynthConfig, template: CpTemplate,
                  trace_id: str = "synth") -> tuple[Trace, GroundTruth]:
    """Assemble ``noise | CP | noise | ... | CP | noise`` with ground truth.

    Each CP instance is independently jittered and DFS-deformed; additive
    white Gaussian noise is applied last over the whole trace.  The trace
    always begins and ends with a noise pad so no CP sits at sample 0.
    Fully reproducible from ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.noise_gap_range

    def draw_gap() -> int:
        return int(rng.integers(lo, hi + 1))

    parts: list[np.ndarray] = []
    starts: list[int] = []
    lengths: list[int] = []
    pos = 0
    if config.n_cps == 0:
        gap = draw_gap()
        parts.append(synth_noise_segment(gap, rng))
        pos += gap
    for i in range(config.n_cps):
        gap = draw_gap() if (config.interleave_noise or i == 0) else 0
        if gap:
            parts.append(synth_noise_segment(gap, rng))
            pos += gap
        instance = jitter_template(template, rng)
        deformed, _ = apply_dfs(instance, config.dfs, config.mean_reconfigs_per_cp, rng)
        starts.append(pos)
        lengths.append(deformed.size)
        parts.append(deformed)
        pos += deformed.size
    if config.n_cps > 0:
        gap = draw_gap()
        if gap:
            parts.append(synth_noise_segment(gap, rng))
            pos += gap
    samples = np.concatenate(parts) if parts else np.zeros(1)
    samples = samples + rng.normal(0.0, config.awgn_sigma, samples.size)
    trace = Trace(samples, sample_rate_hz=SYNTH_SAMPLE_RATE_HZ, id=trace_id)
    gt = GroundTruth(np.asarray(starts, dtype=np.int64), np.asarray(lengths, dtype=np.int64))
    return trace, gt
