"""Band-limited AC magnetic signals and generic time-series containers.

Signals are stored as analytic parameter lists (amplitude, frequency, phase
per tone), not sampled arrays, so downstream consumers can integrate them
exactly.  Sampling happens only for audio I/O and plotting.

Phase convention used throughout the package:

    B(t) = amplitude * cos(2*pi*frequency*t + phase)

i.e. the real part of B * exp(-i*(w*t + phase)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONFIRMED = "confirmed"
AMBIGUOUS = "ambiguous"
REJECTED_NOISE = "rejected_noise"

_SIGN_STATUSES = (CONFIRMED, AMBIGUOUS, REJECTED_NOISE)


def wrap_phase(phi):
    """Wrap an angle (scalar or array) to [-pi, pi)."""
    return (np.asarray(phi) + np.pi) % (2 * np.pi) - np.pi


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignalComponent:
    """One tone of the field to be sensed.

    amplitude is in tesla, frequency in Hz (>= 0; 0 models a DC field),
    phase in rad and normalized to [-pi, pi) on construction.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.amplitude >= 0):
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if not (self.frequency >= 0):
            raise ValueError(f"frequency must be >= 0, got {self.frequency}")
        object.__setattr__(self, "phase", float(wrap_phase(self.phase)))

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency


@dataclass(frozen=True)
class CompositeSignal:
    """A sum of tones, optionally gated by a piecewise time schedule.

    ``components`` are active for all t.  Each ``schedule`` entry
    (t_start, t_end, components) adds tones active only on [t_start, t_end);
    segments must be ordered and non-overlapping.  Evaluation outside every
    segment (and with no always-on components) is zero.
    """

    components: tuple = ()
    schedule: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        sched = tuple((float(a), float(b), tuple(cs)) for a, b, cs in self.schedule)
        for a, b, _ in sched:
            if not b > a:
                raise ValueError(f"schedule segment [{a}, {b}) is empty")
        for (_, b0, _), (a1, _, _) in zip(sched, sched[1:]):
            if a1 < b0:
                raise ValueError("schedule segments must be ordered and non-overlapping")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "schedule", sched)

    @classmethod
    def from_tones(cls, specs) -> "CompositeSignal":
        """Build from an iterable of (amplitude, frequency, phase) triples."""
        return cls(components=tuple(SignalComponent(*s) for s in specs))

    def active_components(self, t: float):
        """Components contributing at time t."""
        out = list(self.components)
        for a, b, cs in self.schedule:
            if a <= t < b:
                out.extend(cs)
        return out

    def timed_components(self):
        """All (component, t_start, t_end) with +/-inf bounds for always-on tones."""
        out = [(c, -math.inf, math.inf) for c in self.components]
        for a, b, cs in self.schedule:
            out.extend((c, a, b) for c in cs)
        return out

    def evaluate(self, t: float) -> float:
        return evaluate(self, t)


def evaluate(signal: CompositeSignal, t: float) -> float:
    """Field value in tesla at time t: sum of active tones."""
    if not np.isfinite(t):
        raise ValueError(f"t must be finite, got {t}")
    total = 0.0
    for c in signal.active_components(float(t)):
        total += c.amplitude * math.cos(c.omega * t + c.phase)
    return total


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled series; samples at start_time + k / sample_rate."""

    sample_rate: float
    start_time: float
    values: np.ndarray

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "values", _readonly(np.asarray(self.values)))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        return len(self.values) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.values)) / self.sample_rate


@dataclass(frozen=True)
class Spectrum:
    """One-sided spectrum bins with per-bin sign-disambiguation status.

    ``sign_status`` is meaningful for heterodyne analyzer outputs; plain FFT
    spectra carry the default "confirmed" on every bin.
    """

    frequency_hz: np.ndarray
    amplitude: np.ndarray
    phase_rad: np.ndarray
    sign_status: tuple = ()

    def __post_init__(self):
        f = np.asarray(self.frequency_hz, dtype=float)
        a = np.asarray(self.amplitude, dtype=float)
        p = np.asarray(self.phase_rad, dtype=float)
        if not (len(f) == len(a) == len(p)):
            raise ValueError("frequency/amplitude/phase lengths differ")
        status = tuple(self.sign_status) if self.sign_status else (CONFIRMED,) * len(f)
        if len(status) != len(f):
            raise ValueError("sign_status length mismatch")
        bad = set(status) - set(_SIGN_STATUSES)
        if bad:
            raise ValueError(f"unknown sign_status values: {bad}")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(a < 0):
            raise ValueError("amplitudes must be >= 0")
        object.__setattr__(self, "frequency_hz", _readonly(f))
        object.__setattr__(self, "amplitude", _readonly(a))
        object.__setattr__(self, "phase_rad", _readonly(p))
        object.__setattr__(self, "sign_status", status)

    def __len__(self) -> int:
        return len(self.frequency_hz)

    def confirmed(self) -> "Spectrum":
        """Bins with sign_status == confirmed."""
        keep = [i for i, s in enumerate(self.sign_status) if s == CONFIRMED]
        return Spectrum(
            self.frequency_hz[keep],
            self.amplitude[keep],
            self.phase_rad[keep],
            tuple(self.sign_status[i] for i in keep),
        )


def synthesize_tones(specs, duration: float, sample_rate: float) -> TimeSeries:
    """Sample a sum of (frequency, amplitude, phase) tones at sample_rate.

    Rejects tones at or above the Nyquist frequency.
    """
    if sample_rate <= 0 or duration < 0:
        raise ValueError("sample_rate must be > 0 and duration >= 0")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for freq, amp, phase in specs:
        if 2 * freq >= sample_rate:
            raise ValueError(
                f"tone at {freq} Hz violates Nyquist for sample_rate {sample_rate} Hz"
            )
        out += amp * np.cos(2 * np.pi * freq * t + phase)
    return TimeSeries(sample_rate=sample_rate, start_time=0.0, values=out)


def _window_values(n: int, window: str) -> np.ndarray:
    if window == "rect":
        return np.ones(n)
    if window == "hann":
        return np.hanning(n)
    raise ValueError(f"unknown window {window!r}")


def fft_magnitude(series: TimeSeries, window: str = "rect") -> Spectrum:
    """One-sided amplitude spectrum of a real series.

    Scaling: a full-scale unit sine on an integer number of periods gives a
    single bin of amplitude 1 (bins are normalized by the coherent window
    gain; the DC bin is not doubled).  Bin k is at k * sample_rate / len.
    Phase is the cosine phase of each bin.  Rectangular window by default;
    non-integer-period tones then leak into neighboring bins.
    """
    x = np.asarray(series.values, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    w = _window_values(len(x), window)
    spec = np.fft.rfft(x * w)
    scale = np.full(len(spec), 2.0 / w.sum())
    scale[0] = 1.0 / w.sum()
    if len(x) % 2 == 0:
        scale[-1] = 1.0 / w.sum()  # unpaired Nyquist bin
    freqs = np.fft.rfftfreq(len(x), d=1.0 / series.sample_rate)
    return Spectrum(
        frequency_hz=freqs,
        amplitude=np.abs(spec) * scale,
        phase_rad=wrap_phase(np.angle(spec)),
    )
