"""Synthetic photon-count readout traces.

One measurement of length t_seq senses the field over its first t_phi and
ends in a projective readout.  Measurements alternate the final pi/2 pulse
between +x and -x, so consecutive measurements 2k and 2k+1 form one sample
pair with fluorescence means

    F+ = Nph * (1 + (C/2) sin(theta_2k))
    F- = Nph * (1 - (C/2) sin(theta_2k+1))

where theta_j = accumulated signal phase of window j + 2*pi*delta_f*t_j
(+ the constant detuning offset, + any injected interferer phase).  The
two half-samples see the field at different times on purpose: that is what
produces the sampling side combs at the pair rate 1/(2 t_seq).

Shot noise is Poisson per measurement (exact sampling up to Nph = 1e6,
Gaussian moment matching above, selectable); the pair difference then has
the standard deviation sqrt(2*Nph).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .physics import GAMMA_E, DriveConfig, PulseSequence, accumulated_phase
from .signals import CompositeSignal, _readonly

_POISSON_EXACT_MAX = 1e6
NOISE_MODELS = ("auto", "poisson", "gaussian", "none")


@dataclass(frozen=True)
class SensorConfig:
    """Sensor parameters.

    contrast_vs_tseq optionally maps t_seq -> contrast for studies where the
    repolarization budget depends on the sequence length; default constant.
    phase_interferers are (frequency_hz, amplitude_rad, phase_rad) tones
    added directly to the readout quantum phase, modeling electronics lines
    that do not originate from the magnetic signal.
    """

    gamma_e: float = GAMMA_E
    contrast: float = 0.0019
    photons_per_measurement: float = 4.6e11
    drive: DriveConfig = field(default_factory=DriveConfig)
    noise_model: str = "auto"
    decoherence: bool = False
    t2: float = 200e-6
    t2_star: float = 8.5e-6
    decoherence_power: float = 1.0
    phase_interferers: tuple = ()
    contrast_vs_tseq: object = None

    def __post_init__(self):
        if not 0 < self.contrast <= 1:
            raise ValueError(f"contrast must be in (0, 1], got {self.contrast}")
        if not self.photons_per_measurement >= 1:
            raise ValueError("photons_per_measurement must be >= 1")
        if not self.gamma_e > 0:
            raise ValueError("gamma_e must be > 0")
        if self.noise_model not in NOISE_MODELS:
            raise ValueError(f"noise_model must be one of {NOISE_MODELS}")

    def effective_contrast(self, seq: PulseSequence) -> float:
        c = self.contrast
        if self.contrast_vs_tseq is not None:
            c = float(self.contrast_vs_tseq(seq.t_seq))
        if self.decoherence:
            t_coh = self.t2_star if seq.n_pulses == 0 else self.t2
            c *= math.exp(-((seq.t_phi / t_coh) ** self.decoherence_power))
        return c


@dataclass(frozen=True)
class ReadoutTrace:
    """Photon counts per sample pair; counts[k] = (F+, F-) for measurements
    (2k, 2k+1).  pair_period = 2 * t_seq.  meta freezes the generating
    configuration for replay."""

    pair_period: float
    counts: np.ndarray
    rng_seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("counts must have shape (n_pairs, 2)")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", _readonly(c))

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def pair_times(self) -> np.ndarray:
        """Start time of each pair (time of its first measurement)."""
        return np.arange(len(self.counts)) * self.pair_period


def _measurement_phases(
    sensor: SensorConfig,
    seq: PulseSequence,
    signal: CompositeSignal,
    n_meas: int,
    delta_f: float,
) -> np.ndarray:
    idx = np.arange(n_meas)
    t_meas = idx * seq.t_seq
    theta = accumulated_phase(seq, signal, idx, sensor.gamma_e)
    theta = theta + 2 * np.pi * delta_f * t_meas + sensor.drive.detuning_phase
    for f_hz, amp_rad, ph in sensor.phase_interferers:
        theta += amp_rad * np.cos(2 * np.pi * f_hz * t_meas + ph)
    return theta


def _draw_counts(means: np.ndarray, model: str, nph: float, rng) -> np.ndarray:
    if model == "auto":
        model = "poisson" if nph <= _POISSON_EXACT_MAX else "gaussian"
    if model == "none":
        return means
    if model == "poisson":
        return rng.poisson(means).astype(float)
    if model == "gaussian":
        return np.clip(means + rng.normal(size=means.shape) * np.sqrt(means), 0.0, None)
    raise ValueError(f"unknown noise model {model!r}")


def simulate_run(
    sensor: SensorConfig,
    seq: PulseSequence,
    signal: CompositeSignal,
    duration: float,
    seed: int,
) -> ReadoutTrace:
    """Simulate a modulated readout run of the given duration.

    The drive frequency difference delta_f must divide the pair sampling
    rate 1/(2 t_seq) an even integer number of times so that every
    modulation cycle is sampled evenly; violations are rejected.
    Deterministic for a fixed seed.
    """
    return _run(sensor, seq, signal, duration, seed, sensor.drive.delta_f)


def direct_readout_run(
    sensor: SensorConfig,
    seq: PulseSequence,
    signal: CompositeSignal,
    duration: float,
    seed: int,
) -> ReadoutTrace:
    """Conventional single-drive readout: both pulses from one source
    (delta_f = 0), so the fluorescence responds as sin(theta) and saturates
    for large phase amplitudes."""
    return _run(sensor, seq, signal, duration, seed, 0.0)


def _run(sensor, seq, signal, duration, seed, delta_f) -> ReadoutTrace:
    if duration < 2 * seq.t_seq:
        raise ValueError("duration must cover at least one sample pair (2 t_seq)")
    if delta_f < 0:
        raise ValueError("delta_f must be >= 0")
    f_pair = 1.0 / (2 * seq.t_seq)
    if delta_f > 0:
        n_per_cycle = f_pair / delta_f
        if abs(n_per_cycle - round(n_per_cycle)) > 1e-9 or round(n_per_cycle) % 2:
            raise ValueError(
                f"delta_f={delta_f} Hz is not commensurate with the pair rate "
                f"{f_pair} Hz: each modulation cycle must contain an even "
                f"integer number of samples (got {n_per_cycle:.6g})"
            )
    n_pairs = int(math.floor(duration * f_pair))
    theta = _measurement_phases(sensor, seq, signal, 2 * n_pairs, delta_f)
    nph = sensor.photons_per_measurement
    c_eff = sensor.effective_contrast(seq)
    mean_plus = nph * (1.0 + 0.5 * c_eff * np.sin(theta[0::2]))
    mean_minus = nph * (1.0 - 0.5 * c_eff * np.sin(theta[1::2]))
    rng = np.random.default_rng(seed)
    f_plus = _draw_counts(mean_plus, sensor.noise_model, nph, rng)
    f_minus = _draw_counts(mean_minus, sensor.noise_model, nph, rng)
    meta = {
        "sequence": {"kind": seq.kind, "n_pulses": seq.n_pulses, "t_phi_s": seq.t_phi,
                     "m": seq.m},
        "delta_f_hz": delta_f,
        "contrast": c_eff,
        "photons_per_measurement": nph,
        "noise_model": sensor.noise_model,
        "seed": seed,
    }
    return ReadoutTrace(
        pair_period=2 * seq.t_seq,
        counts=np.column_stack([f_plus, f_minus]),
        rng_seed=seed,
        meta=meta,
    )
