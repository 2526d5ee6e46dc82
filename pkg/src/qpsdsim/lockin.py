"""Two-stage demodulation and the noise / sensitivity calculators.

Stage 1 (pair differencing at the sample rate 1/(2 t_seq)) turns the
alternating +x/-x photon counts into one signed fluorescence sample per
pair,

    s_k = (F+ - F-) / 2,

whose noise-free value is (Nph C / 2) sin(theta) and whose shot-noise
standard deviation is sqrt(Nph / 2).

Stage 2 demodulates s(t) at the drive frequency difference delta_f with a
quadrature mixer and a cascade of identical one-pole low-pass stages (pole
at the configured cutoff per stage, order 4 by default):

    X = 2 * LP[s(t) sin(2 pi delta_f t)],   Y = 2 * LP[s(t) cos(2 pi delta_f t)]

so a pure input A sin(2 pi delta_f t + phi0) settles to X + iY = A e^{i phi0}.

The least-squares fit of one modulation cycle (N evenly spaced samples,
N even) is the reference phase estimator; its shot-noise-limited error is

    delta_phi = (2 / sqrt(N)) / (C sqrt(Nph))

which propagates through the sequence filter to the field sensitivity

    eta = 2 / (gamma_e |G(2 pi / t_phi)| C) * sqrt(2 t_seq / Nph).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .physics import PulseSequence, filter_closed_form
from .sensor import ReadoutTrace, SensorConfig
from .signals import TimeSeries, _readonly, wrap_phase


@dataclass(frozen=True)
class LockInConfig:
    """Second-stage demodulator settings.

    samples_per_cycle is the number of stage-1 samples per modulation cycle
    (pair rate / demod2_freq); it must be an even integer >= 4 so the
    quadrature sums of the cycle fit are exactly orthogonal.
    """

    demod2_freq: float
    cutoff: float
    filter_order: int = 4
    samples_per_cycle: int = 10

    def __post_init__(self):
        if self.demod2_freq <= 0:
            raise ValueError("demod2_freq must be > 0")
        if not 0 < self.cutoff < self.demod2_freq:
            raise ValueError("cutoff must satisfy 0 < cutoff < demod2_freq")
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        n = self.samples_per_cycle
        if n < 4 or n % 2:
            raise ValueError(
                f"samples_per_cycle must be an even integer >= 4, got {n}"
            )

    @property
    def sample_rate(self) -> float:
        return self.samples_per_cycle * self.demod2_freq

    @property
    def settle_time(self) -> float:
        """Filter settling allowance discarded before analysis."""
        return 7 * self.filter_order / (2 * math.pi * self.cutoff)

    @classmethod
    def for_sequence(cls, seq: PulseSequence, samples_per_cycle: int = 10,
                     cutoff: float | None = None, filter_order: int = 4) -> "LockInConfig":
        """Config matched to a sequence: delta_f = pair rate / samples_per_cycle."""
        f_pair = 1.0 / (2 * seq.t_seq)
        df = f_pair / samples_per_cycle
        return cls(demod2_freq=df, cutoff=cutoff if cutoff is not None else df / 2.5,
                   filter_order=filter_order, samples_per_cycle=samples_per_cycle)


@dataclass(frozen=True)
class DemodOutput:
    """Demodulated quadratures and derived phase/amplitude series."""

    sample_rate: float
    start_time: float
    samples: np.ndarray  # complex X + iY

    def __post_init__(self):
        object.__setattr__(self, "samples", _readonly(np.asarray(self.samples, dtype=complex)))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) / self.sample_rate

    @property
    def x(self) -> np.ndarray:
        return self.samples.real

    @property
    def y(self) -> np.ndarray:
        return self.samples.imag

    @property
    def phase(self) -> np.ndarray:
        """Wrapped phase atan2(Y, X) in [-pi, pi)."""
        return wrap_phase(np.angle(self.samples))

    @property
    def phase_unwrapped(self) -> np.ndarray:
        """Nearest-branch continuation of the wrapped phase."""
        return np.unwrap(np.angle(self.samples))

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.samples)

    def phase_series(self) -> TimeSeries:
        return TimeSeries(self.sample_rate, self.start_time, self.phase)


def demod_stage1(trace: ReadoutTrace) -> TimeSeries:
    """Pair differencing: s_k = (F+ - F-)/2 at the pair rate 1/(2 t_seq).

    The sample timestamp is the midpoint of the two measurement start times,
    pair_period/4 into each pair.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    s = 0.5 * (trace.counts[:, 0] - trace.counts[:, 1])
    return TimeSeries(
        sample_rate=1.0 / trace.pair_period,
        start_time=trace.pair_period / 4.0,
        values=s,
    )


def one_pole_cascade(x: np.ndarray, cutoff: float, order: int, sample_rate: float) -> np.ndarray:
    """Cascade of identical one-pole low-pass stages, pole at `cutoff` each
    (matched-z discretization), asymptotic rolloff order * 20 dB/decade."""
    p = math.exp(-2 * math.pi * cutoff / sample_rate)
    y = np.asarray(x)
    for _ in range(order):
        y = lfilter([1.0 - p], [1.0, -p], y)
    return y


def lowpass_response(f, cutoff: float, order: int):
    """|H(f)| of the analog prototype of one_pole_cascade: |1/(1+if/fc)|^order."""
    return (1.0 + (np.asarray(f) / cutoff) ** 2) ** (-order / 2.0)


def one_pole_cascade_response(f, cutoff: float, order: int, sample_rate: float):
    """Exact |H(f)| of the discrete one_pole_cascade implementation."""
    p = math.exp(-2 * math.pi * cutoff / sample_rate)
    z = np.exp(-2j * math.pi * np.asarray(f) / sample_rate)
    return np.abs((1.0 - p) / (1.0 - p * z)) ** order


def demod_stage2(series: TimeSeries, config: LockInConfig) -> DemodOutput:
    """Quadrature demodulation of the stage-1 series at demod2_freq.

    The mixer references use the actual sample timestamps, so the recovered
    phase needs no grid-alignment correction.
    """
    expected = config.sample_rate
    if abs(series.sample_rate - expected) > 1e-6 * expected:
        raise ValueError(
            f"series rate {series.sample_rate} Hz does not match "
            f"samples_per_cycle * demod2_freq = {expected} Hz"
        )
    t = series.times
    ref = 2 * np.pi * config.demod2_freq * t
    x = 2.0 * one_pole_cascade(series.values * np.sin(ref), config.cutoff,
                               config.filter_order, series.sample_rate)
    y = 2.0 * one_pole_cascade(series.values * np.cos(ref), config.cutoff,
                               config.filter_order, series.sample_rate)
    return DemodOutput(series.sample_rate, series.start_time, x + 1j * y)


def lsq_phase_fit(samples) -> tuple:
    """Least-squares (phase, amplitude) of one modulation cycle.

    Fits A sin(2 pi k / N + phi) to N evenly spaced samples via the two
    quadrature sums (the closed-form normal equations; exact because the
    even-N grid makes sin and cos orthogonal).  Returns (nan, amplitude)
    when the amplitude is consistent with zero (below 1e-12 of the input
    scale), where the phase is undefined.
    """
    s = np.asarray(samples, dtype=float)
    n = len(s)
    if n < 4 or n % 2:
        raise ValueError(f"need an even number of samples >= 4, got {n}")
    grid = 2 * np.pi * np.arange(n) / n
    a = 2.0 * np.mean(s * np.sin(grid))
    b = 2.0 * np.mean(s * np.cos(grid))
    amplitude = math.hypot(a, b)
    scale = np.max(np.abs(s)) if np.any(s) else 0.0
    if amplitude <= 1e-12 * scale or amplitude == 0.0:
        return (math.nan, amplitude)
    return (math.atan2(b, a), amplitude)


def cycle_phase_fit(series: TimeSeries, config: LockInConfig) -> tuple:
    """Per-cycle least-squares fit of A sin(2 pi delta_f t + phi) using the
    series' actual timestamps.  Returns (phases, amplitudes) arrays, one
    entry per complete modulation cycle; trailing samples short of a full
    cycle are dropped.
    """
    n = config.samples_per_cycle
    n_cycles = len(series) // n
    if n_cycles == 0:
        raise ValueError("series shorter than one modulation cycle")
    m = n_cycles * n
    ref = 2 * np.pi * config.demod2_freq * series.times[:m]
    s = series.values[:m].reshape(n_cycles, n)
    sin_ref = np.sin(ref).reshape(n_cycles, n)
    cos_ref = np.cos(ref).reshape(n_cycles, n)
    a = 2.0 * np.mean(s * sin_ref, axis=1)
    b = 2.0 * np.mean(s * cos_ref, axis=1)
    return np.arctan2(b, a), np.hypot(a, b)


def steady_phase(demod: DemodOutput, config: LockInConfig,
                 discard: float | None = None) -> tuple:
    """(phase, amplitude) from the settled part of a demodulated run.

    Discards `discard` seconds (default twice the filter settle time), then
    averages the complex samples over the largest whole number of modulation
    cycles, which cancels the 2*delta_f mixing image exactly.
    """
    if discard is None:
        discard = 2 * config.settle_time
    n_skip = int(math.ceil(discard * demod.sample_rate))
    rest = len(demod) - n_skip
    n_cyc = config.samples_per_cycle
    n_use = (rest // n_cyc) * n_cyc
    if n_use <= 0:
        raise ValueError("run too short: nothing left after settle discard")
    z = np.mean(demod.samples[n_skip:n_skip + n_use])
    return float(np.angle(z)), float(np.abs(z))


def phase_noise(sensor: SensorConfig, n_samples: int) -> float:
    """Shot-noise-limited phase error of an N-sample cycle fit:
    (2/sqrt(N)) / (C sqrt(Nph))."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    return 2.0 / (
        math.sqrt(n_samples)
        * sensor.contrast
        * math.sqrt(sensor.photons_per_measurement)
    )


def sensitivity(sensor: SensorConfig, seq: PulseSequence) -> float:
    """Shot-noise-limited field sensitivity (T/sqrt(Hz)) of the modulated
    readout, with the filter evaluated at the sequence's principal frequency
    2 pi / t_phi:  eta = 2 / (gamma_e |G| C) * sqrt(2 t_seq / Nph)."""
    g = filter_closed_form(seq, 2 * math.pi / seq.t_phi).magnitude
    return (
        2.0
        / (sensor.gamma_e * g * sensor.contrast)
        * math.sqrt(2 * seq.t_seq / sensor.photons_per_measurement)
    )


def sensitivity_fluorescence(sensor: SensorConfig, seq: PulseSequence) -> float:
    """Sensitivity of the conventional fluorescence readout in its
    small-angle regime; better than the modulated readout by sqrt(2)."""
    return sensitivity(sensor, seq) / math.sqrt(2)


def ldr_db(k_sf_deg_per_nt: float, eta_t_sqrt_hz: float, bandwidth_hz: float) -> float:
    """Linear dynamic range in dB: full phase span [-pi, pi] over the phase
    noise floor, 20*log10(180 deg / (k_sf * eta * sqrt(bandwidth))).

    k_sf is the calibrated scalar factor in deg/nT; eta is in T/sqrt(Hz).
    """
    if k_sf_deg_per_nt <= 0 or eta_t_sqrt_hz <= 0 or bandwidth_hz <= 0:
        raise ValueError("all inputs must be > 0")
    eta_nt = eta_t_sqrt_hz / 1e-9
    noise_deg = k_sf_deg_per_nt * eta_nt * math.sqrt(bandwidth_hz)
    return 20.0 * math.log10(180.0 / noise_deg)
