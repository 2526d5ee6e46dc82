"""Spin-readout physics: switching functions, sequence filter functions,
accumulated quantum phase, two-drive readout, and heterodyne frequency
arithmetic.

The pulse sequence (Ramsey or CPMG-n; n = 1 is a Hahn echo) defines a
switching function g(t) on one measurement window:

    g(t) = +1            on [0, T_phi/(2n))
           (-1)^k        on [(2k-1) T_phi/(2n), (2k+1) T_phi/(2n)),  k < n
           (-1)^n        on [(2n-1) T_phi/(2n), T_phi)
           0             on [T_phi, m*T_phi)          <- readout dead time

(pi pulses sit at odd multiples of T_phi/(2n); Ramsey is g = 1 on
[0, T_phi)).  The filter function is the exact complex integral

    G(w) = integral_0^T_phi g(t) exp(-i w t) dt     [units: seconds]

and a tone B*cos(w t + phase) sensed in window N (which spans
[N*T_seq, N*T_seq + T_phi]) accumulates the quantum phase

    phi_r(N) = gamma_e * B * Re[ exp(-i phase) exp(-i w N T_seq) G(w) ].

Closed forms: Ramsey G = (2/w) sin(wT/2) e^{-iwT/2}; CPMG-n

    G_n(w) = u * 4 sin^2(wT/4n) X(wT/2) / (w cos(wT/2n)) * e^{-iwT/2}

with (X, u) = (cos, +i) for odd n and (sin, -1) for even n.  The odd/even
prefactor makes the closed form equal to the defining integral; for n = 1
it reduces to (4/w) sin^2(wT/4) e^{-i(wT/2 - pi/2)}, giving the Hahn
anchors |G_1(2pi/T)| = |G_1(pi/T)| = 2T/pi.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .signals import CompositeSignal, wrap_phase

# electron gyromagnetic ratio, 2*pi * 28 Hz/nT, in rad/(s*T)
GAMMA_E = 2 * math.pi * 2.8e10

# closed form delegates to the exact integral when the angle w*T/(2n) is
# within this distance of an odd multiple of pi/2 (0/0 in the closed form)
_SINGULAR_ANGLE_TOL = 1e-6


@dataclass(frozen=True)
class PulseSequence:
    """Measurement sequence timing: n_pulses pi pulses (0 = Ramsey, 1 = Hahn),
    phase-accumulation time t_phi, sequence length t_seq = m * t_phi, and the
    timing quantum t_clk used to build perturbed sequences."""

    n_pulses: int
    t_phi: float
    m: int = 1
    t_clk: float = 4e-9

    def __post_init__(self):
        if self.n_pulses < 0 or int(self.n_pulses) != self.n_pulses:
            raise ValueError(f"n_pulses must be an integer >= 0, got {self.n_pulses}")
        if not self.t_phi > 0:
            raise ValueError(f"t_phi must be > 0, got {self.t_phi}")
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")

    @classmethod
    def ramsey(cls, t_phi: float, m: int = 1, **kw) -> "PulseSequence":
        return cls(0, t_phi, m, **kw)

    @classmethod
    def hahn(cls, t_phi: float, m: int = 1, **kw) -> "PulseSequence":
        return cls(1, t_phi, m, **kw)

    @classmethod
    def cpmg(cls, n: int, t_phi: float, m: int = 1, **kw) -> "PulseSequence":
        if n < 1:
            raise ValueError("CPMG order must be >= 1")
        return cls(n, t_phi, m, **kw)

    @property
    def t_seq(self) -> float:
        return self.m * self.t_phi

    @property
    def kind(self) -> str:
        if self.n_pulses == 0:
            return "ramsey"
        if self.n_pulses == 1:
            return "hahn"
        return f"cpmg{self.n_pulses}"

    def pulse_times(self) -> list:
        """pi-pulse instants: odd multiples of t_phi / (2 n)."""
        n = self.n_pulses
        return [(2 * k - 1) * self.t_phi / (2 * n) for k in range(1, n + 1)]

    def segments(self) -> list:
        """(start, stop, sign) pieces of g(t) on [0, t_phi)."""
        pts = [0.0] + self.pulse_times() + [self.t_phi]
        return [(pts[j], pts[j + 1], (-1) ** j) for j in range(len(pts) - 1)]

    def perturbed(self, dt: float | None = None) -> "PulseSequence":
        """Same sequence with t_phi shifted by dt (default +t_clk)."""
        step = self.t_clk if dt is None else dt
        return PulseSequence(self.n_pulses, self.t_phi + step, self.m, self.t_clk)


@dataclass(frozen=True)
class DriveConfig:
    """Two microwave drives: detunings and Rabi frequencies in rad/s, and
    the drive frequency difference delta_f in Hz (the readout modulation
    rate).  Detuning ratios above 0.1 leave the near-resonance regime of the
    closed-form readout and trigger a warning."""

    delta_omega_1: float = 0.0
    delta_omega_2: float = 0.0
    omega_1: float = 2 * math.pi * 1e6
    omega_2: float = 2 * math.pi * 1e6
    delta_f: float = 500.0

    def __post_init__(self):
        if self.omega_1 <= 0 or self.omega_2 <= 0:
            raise ValueError("Rabi frequencies must be > 0")
        worst = max(
            abs(self.delta_omega_1) / self.omega_1,
            abs(self.delta_omega_2) / self.omega_2,
        )
        if worst > 0.1:
            warnings.warn(
                f"detuning/Rabi ratio {worst:.3g} > 0.1: near-resonance "
                "approximation of the two-drive readout is unreliable",
                stacklevel=2,
            )

    @property
    def detuning_phase(self) -> float:
        """Constant readout phase offset (pi/2)(dw1/W1 - dw2/W2)."""
        return (math.pi / 2) * (
            self.delta_omega_1 / self.omega_1 - self.delta_omega_2 / self.omega_2
        )


@dataclass(frozen=True)
class FilterValue:
    """Polar filter-function value; from_limit marks closed-form evaluations
    that were delegated to the exact integral near a 0/0 point."""

    magnitude: float
    phase: float
    from_limit: bool = False

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ValueError("magnitude must be >= 0")

    @property
    def as_complex(self) -> complex:
        return self.magnitude * complex(math.cos(self.phase), math.sin(self.phase))


def switching_function(seq: PulseSequence, t: float) -> int:
    """g(t) for one sequence period; t must lie in [0, t_seq)."""
    if not (0 <= t < seq.t_seq):
        raise ValueError(f"t={t} outside [0, t_seq={seq.t_seq}); reduce modulo t_seq")
    if t >= seq.t_phi:
        return 0
    if seq.n_pulses == 0:
        return 1
    # pulses before t: odd multiples of t_phi/(2n) not exceeding t
    x = 2 * seq.n_pulses * t / seq.t_phi
    return -1 if int((x + 1) // 2) % 2 else 1


def _segment_integral(seq: PulseSequence, omega: float, lo: float, hi: float) -> complex:
    """Exact integral of g(t) e^{-i w t} over [lo, hi] within [0, t_phi].

    Per-segment antiderivative in half-angle form, which stays
    well-conditioned at small w*t_phi.
    """
    total = 0.0 + 0.0j
    for a, b, sign in seq.segments():
        a = max(a, lo)
        b = min(b, hi)
        if b <= a:
            continue
        if omega == 0:
            total += sign * (b - a)
        else:
            total += (
                sign
                * np.exp(-0.5j * omega * (a + b))
                * 2.0
                * math.sin(0.5 * omega * (b - a))
                / omega
            )
    return total


def filter_numeric_oracle(seq: PulseSequence, omega: float) -> FilterValue:
    """G(w) by exact piecewise integration of g(t) e^{-iwt}; the independent
    reference the closed form is checked against."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    g = _segment_integral(seq, omega, 0.0, seq.t_phi)
    return FilterValue(magnitude=abs(g), phase=float(np.angle(g)))


def _closed_form_complex(seq: PulseSequence, omega: float) -> complex:
    n = seq.n_pulses
    t = seq.t_phi
    if n == 0:
        if omega == 0:
            return complex(t)
        return (2.0 / omega) * math.sin(0.5 * omega * t) * np.exp(-0.5j * omega * t)
    if omega == 0:
        return 0j  # any echo refocuses DC exactly
    x = omega * t / (4 * n)
    osc = math.cos(0.5 * omega * t) if n % 2 else math.sin(0.5 * omega * t)
    bracket = 4 * math.sin(x) ** 2 * osc / (omega * math.cos(2 * x))
    prefactor = 1j if n % 2 else -1.0
    return prefactor * bracket * np.exp(-0.5j * omega * t)


def _singular_distance(seq: PulseSequence, omega: float) -> float:
    """Distance of w*t_phi/(2n) from the nearest odd multiple of pi/2."""
    if seq.n_pulses == 0:
        return math.inf
    ang = omega * seq.t_phi / (2 * seq.n_pulses)
    return abs(abs(ang % math.pi) - math.pi / 2)


def filter_closed_form(seq: PulseSequence, omega: float) -> FilterValue:
    """Closed-form G(w).

    Within _SINGULAR_ANGLE_TOL of a cos(wT/2n) zero the expression is 0/0
    with a finite limit; there the value is taken from the exact integral
    and flagged via from_limit.
    """
    if omega < 0:
        raise ValueError("omega must be >= 0")
    if _singular_distance(seq, omega) < _SINGULAR_ANGLE_TOL:
        base = filter_numeric_oracle(seq, omega)
        return FilterValue(base.magnitude, base.phase, from_limit=True)
    g = _closed_form_complex(seq, omega)
    return FilterValue(magnitude=abs(g), phase=float(np.angle(g)))


def filter_curve(seq: PulseSequence, omegas) -> tuple:
    """Vectorized closed-form and oracle curves; returns
    (magnitude, phase, oracle_magnitude, oracle_phase) arrays."""
    omegas = np.asarray(omegas, dtype=float)
    mag = np.empty_like(omegas)
    ph = np.empty_like(omegas)
    omag = np.empty_like(omegas)
    oph = np.empty_like(omegas)
    for i, w in enumerate(omegas):
        cf = filter_closed_form(seq, float(w))
        orc = filter_numeric_oracle(seq, float(w))
        mag[i], ph[i] = cf.magnitude, cf.phase
        omag[i], oph[i] = orc.magnitude, orc.phase
    return mag, ph, omag, oph


def _filter_complex(seq: PulseSequence, omega: float) -> complex:
    """Complex G(w), preferring the closed form away from 0/0 points."""
    if _singular_distance(seq, omega) >= _SINGULAR_ANGLE_TOL:
        return _closed_form_complex(seq, omega)
    return _segment_integral(seq, omega, 0.0, seq.t_phi)


def accumulated_phase(
    seq: PulseSequence,
    signal: CompositeSignal,
    n_index,
    gamma_e: float = GAMMA_E,
):
    """Quantum phase (rad) accumulated in measurement window(s) n_index.

    Window N spans [N*t_seq, N*t_seq + t_phi].  n_index may be a scalar or
    an integer array; the return matches its shape.  Tones gated by a
    schedule are integrated exactly: windows fully inside a segment use the
    full filter value, windows straddling a segment edge use the partial
    integral over the overlap.
    """
    scalar = np.ndim(n_index) == 0
    n_arr = np.asarray(n_index, dtype=float).ravel()
    t_win = n_arr * seq.t_seq
    total = np.zeros(n_arr.shape, dtype=float)

    for comp, s0, s1 in signal.timed_components():
        if comp.amplitude == 0.0:
            continue
        w = comp.omega
        c = gamma_e * comp.amplitude * np.exp(-1j * comp.phase)
        if math.isinf(s0) and math.isinf(s1):
            g = _filter_complex(seq, w)
            total += np.real(c * g * np.exp(-1j * w * t_win))
            continue
        # scheduled tone: windows overlapping [s0, s1)
        active = (t_win + seq.t_phi > s0) & (t_win < s1)
        full = (t_win >= s0) & (t_win + seq.t_phi <= s1)
        if np.any(full):
            g = _segment_integral(seq, w, 0.0, seq.t_phi)
            total[full] += np.real(c * g * np.exp(-1j * w * t_win[full]))
        for idx in np.nonzero(active & ~full)[0]:
            t0 = t_win[idx]
            lo = max(0.0, s0 - t0)
            hi = min(seq.t_phi, s1 - t0)
            g = _segment_integral(seq, w, lo, hi)
            total[idx] += np.real(c * g * np.exp(-1j * w * t0))

    if scalar:
        return float(total[0])
    return total.reshape(np.shape(n_index))


def ramsey_two_drive_expectation(drive: DriveConfig, phi: float, t) -> float:
    """Spin-z expectation of the two-drive readout:

        sin[phi + (pi/2)(dw1/W1 - dw2/W2) + 2*pi*delta_f*t]

    The detuning term keeps only the drive-oscillator phase advance over the
    pi/2 pulses; exact integration of the pulse dynamics adds an
    axis-tilt contribution of the same order (see tests), so this expression
    is reliable only for detuning ratios well below 0.05.
    """
    return np.sin(phi + drive.detuning_phase + 2 * np.pi * drive.delta_f * np.asarray(t))


def heterodyne_frequency(signal_freq: float, seq: PulseSequence, k: int) -> float:
    """Signed heterodyne frequency of a tone against reference k / t_seq.

    The tone must lie within half a comb spacing of the reference; otherwise
    k indexes the wrong reference and the call is rejected.
    """
    f_ref = k / seq.t_seq
    f_comb = 1.0 / seq.t_seq
    if abs(signal_freq - f_ref) >= f_comb / 2:
        raise ValueError(
            f"signal at {signal_freq} Hz is outside (±{f_comb / 2} Hz of) "
            f"reference k={k} at {f_ref} Hz"
        )
    return signal_freq - f_ref


def reference_shift(seq: PulseSequence, delta_t_seq: float, omega_ref: float) -> float:
    """Heterodyne-frequency shift (rad/s) when t_seq changes by delta_t_seq
    at fixed t_phi: w_ref * delta_t_seq / t_seq."""
    return omega_ref * delta_t_seq / seq.t_seq
