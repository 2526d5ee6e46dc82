"""Multi-section heterodyne spectrum analysis.

Protocol per section:

1. Pick a reference frequency on the sequence comb, f_ref = 1/t_phi +
   epsilon/t_seq with epsilon in {-1, 0, +1} (always an exact multiple of
   1/t_seq).  Tones within the demodulator passband of f_ref appear in the
   phase readout at their absolute offset |f - f_ref|.
2. Record a trace, demodulate, FFT the settled phase readout.
3. Repeat with the perturbed sequence t_phi' = t_phi + t_clk, which moves
   the reference by delta = f_ref - f_ref'.  Real tones above the reference
   shift up by delta, tones below shift down; spikes that do not shift are
   systematic electronics lines and get rejected.
4. Map confirmed peaks to absolute frequency and tesla, then merge sections.

Amplitudes are compensated for the demodulator filter droop |H(f_offset)|
and converted to field units through gamma_e |G(2 pi f_abs)|.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .lockin import LockInConfig, one_pole_cascade_response
from .physics import PulseSequence, filter_closed_form
from .pipeline import qpsd_run
from .sensor import SensorConfig
from .signals import (
    AMBIGUOUS,
    CONFIRMED,
    REJECTED_NOISE,
    CompositeSignal,
    Spectrum,
    TimeSeries,
    fft_magnitude,
)


@dataclass(frozen=True)
class Section:
    """One analysis band: center (= reference) frequency and the sequence
    timing that realizes it.  The center must satisfy
    center = 1/t_phi + epsilon/t_seq, i.e. sit on the comb k/t_seq."""

    center_freq: float
    t_phi: float
    m: int
    epsilon: int = 0
    half_band: float | None = None

    def __post_init__(self):
        if self.epsilon not in (-1, 0, 1):
            raise ValueError("epsilon must be -1, 0, or +1")
        t_seq = self.m * self.t_phi
        expected = 1.0 / self.t_phi + self.epsilon / t_seq
        if abs(self.center_freq - expected) > 1e-6 * expected:
            raise ValueError(
                f"center {self.center_freq} Hz != 1/t_phi + eps/t_seq = {expected} Hz"
            )

    @classmethod
    def at(cls, center_freq: float, m: int, epsilon: int = 0,
           half_band: float | None = None) -> "Section":
        """Section at a given reference: t_phi = (m + epsilon)/(m * center)."""
        if center_freq <= 0:
            raise ValueError("center_freq must be > 0")
        if m + epsilon < 1:
            raise ValueError("m + epsilon must be >= 1")
        t_phi = (m + epsilon) / (m * center_freq)
        return cls(center_freq, t_phi, m, epsilon, half_band)

    def sequence(self, t_clk: float = 4e-9) -> PulseSequence:
        return PulseSequence.hahn(self.t_phi, m=self.m, t_clk=t_clk)

    def reference_freq(self, seq: PulseSequence) -> float:
        """Reference of this section realized by seq (nominal or perturbed):
        the same comb index k = m + epsilon on seq's comb."""
        return (self.m + self.epsilon) / seq.t_seq


@dataclass(frozen=True)
class AnalyzerPlan:
    sections: tuple
    t_clk: float = 4e-9
    spike_threshold: float = 5.0
    trace_duration: float = 10.0


@dataclass(frozen=True)
class SectionResult:
    """Raw and resolved spectra of one section.

    nominal_spectrum / perturbed_spectrum are readout-domain phase spectra
    (amplitude in rad vs heterodyne frequency); the *_am companions are the
    relative amplitude-modulation spectra of the same runs, used to reject
    demodulation images (a phase tone is pure PM, a mixing image splits
    its energy equally between AM and PM).  resolved is the
    sign-disambiguated absolute-frequency spectrum in tesla.
    """

    section: Section
    f_ref_nominal: float
    f_ref_perturbed: float
    nominal_spectrum: Spectrum
    perturbed_spectrum: Spectrum
    nominal_am: Spectrum
    perturbed_am: Spectrum
    resolution_hz: float
    trace_duration: float
    lockin: LockInConfig
    gamma_e: float
    spike_threshold: float = 5.0
    resolved: Spectrum | None = None

    @property
    def reference_shift_hz(self) -> float:
        """Signed reference move under the perturbation, f_ref - f_ref'."""
        return self.f_ref_nominal - self.f_ref_perturbed


def plan_sections(
    range_lo: float,
    range_hi: float,
    per_section_bw: float,
    f_s: float,
    f_c_lia: float,
    *,
    t_clk: float = 4e-9,
    spike_threshold: float = 5.0,
    trace_duration: float = 10.0,
    alias_margin: float = 50.0,
) -> AnalyzerPlan:
    """Tile [range_lo, range_hi] with sections of width per_section_bw.

    f_s is the target pair sampling rate; each section's m is chosen near it
    subject to the anti-aliasing requirement that the whole analyzed range
    fall inside the section's alias-free window
    [f_ref - (f_s_sec - f_c - margin), f_ref + (f_s_sec - f_c - margin)],
    so in-range tones from other sections fold beyond the section band.
    Raises when no m satisfies it (coverage infeasible at this bandwidth /
    sampling rate).
    """
    if not 0 < range_lo <= range_hi:
        raise ValueError("need 0 < range_lo <= range_hi")
    if per_section_bw <= 0:
        raise ValueError("per_section_bw must be > 0")
    if per_section_bw > 2 * f_c_lia:
        raise ValueError(
            f"per_section_bw={per_section_bw} Hz exceeds the demodulator "
            f"passband 2*f_c = {2 * f_c_lia} Hz"
        )
    span = range_hi - range_lo
    n_sections = max(1, math.ceil(span / per_section_bw))
    sections = []
    for i in range(n_sections):
        center = range_lo + per_section_bw * (i + 0.5)
        t_phi = 1.0 / center
        m_target = max(1, round(1.0 / (2 * f_s * t_phi)))
        candidates = sorted(
            {1, m_target - 1, m_target, m_target + 1} - {0, -1},
            key=lambda m: abs(1.0 / (2 * m * t_phi) - f_s),
        )
        chosen = None
        for m in candidates:
            f_s_sec = 1.0 / (2 * m * t_phi)
            reach = f_s_sec - f_c_lia - alias_margin
            if range_lo >= center - reach and range_hi <= center + reach:
                chosen = m
                break
        if chosen is None:
            raise ValueError(
                f"section at {center} Hz cannot cover [{range_lo}, {range_hi}] Hz "
                f"alias-free at any sampling rate near {f_s} Hz; reduce the "
                "analyzed span or raise f_s"
            )
        sections.append(
            Section(center, t_phi, chosen, 0, half_band=per_section_bw / 2)
        )
    return AnalyzerPlan(
        sections=tuple(sections),
        t_clk=t_clk,
        spike_threshold=spike_threshold,
        trace_duration=trace_duration,
    )


def _hann_mainlobe(x):
    """Hann window amplitude response at a fractional bin offset |x| <~ 1."""
    x = float(x)
    if abs(abs(x) - 1.0) < 1e-9:
        return 0.5
    return float(np.sinc(x) / (1.0 - x * x))


def spike_threshold_level(amplitudes: np.ndarray, multiple: float) -> float:
    """Robust spike threshold: median floor + multiple * scaled MAD."""
    a = np.asarray(amplitudes)
    med = float(np.median(a))
    mad = float(np.median(np.abs(a - med)))
    return med + multiple * 1.4826 * mad


def find_peaks(
    spectrum: Spectrum,
    threshold_multiple: float,
    band: tuple,
    min_separation_bins: int = 4,
    relative_floor: float = 1e-2,
) -> list:
    """Interpolated (freq, amplitude, phase) peaks above the spike threshold.

    Local maxima inside `band` are refined by log-parabolic interpolation
    and corrected for the Hann main-lobe shape; peaks closer than
    min_separation_bins to a stronger accepted peak are suppressed.  The
    threshold is floored at relative_floor * max amplitude so that on
    near-noiseless spectra (MAD ~ 0) window sidelobes of strong tones do
    not register as peaks; -40 dB is below the Hann sidelobes that survive
    the separation rule.
    """
    f = spectrum.frequency_hz
    a = spectrum.amplitude
    if len(f) < 3:
        return []
    df = f[1] - f[0]
    thr = max(
        spike_threshold_level(a, threshold_multiple),
        relative_floor * float(np.max(a)),
    )
    idx = [
        i
        for i in range(1, len(a) - 1)
        if band[0] <= f[i] <= band[1]
        and a[i] > thr
        and a[i] >= a[i - 1]
        and a[i] >= a[i + 1]
    ]
    idx.sort(key=lambda i: -a[i])
    peaks = []
    used = []
    for i in idx:
        if any(abs(i - j) < min_separation_bins for j in used):
            continue
        used.append(i)
        if a[i - 1] > 0 and a[i + 1] > 0:
            lm, l0, lp = math.log(a[i - 1]), math.log(a[i]), math.log(a[i + 1])
            denom = lm - 2 * l0 + lp
            delta = 0.5 * (lm - lp) / denom if denom < 0 else 0.0
        else:
            delta = 0.0
        delta = min(0.6, max(-0.6, delta))
        peaks.append(
            (f[i] + delta * df, a[i] / _hann_mainlobe(delta), spectrum.phase_rad[i])
        )
    peaks.sort()
    return peaks


def _run_spectrum(
    section: Section,
    seq: PulseSequence,
    signal: CompositeSignal,
    sensor: SensorConfig,
    lockin_template: LockInConfig,
    seed: int,
    duration: float,
):
    """One simulate -> demod -> FFT pass.

    Returns (pm_spectrum, am_spectrum, lockin, f_ref, effective duration):
    the phase-modulation spectrum (rad) and the relative amplitude-
    modulation spectrum of the settled demod output.
    """
    f_pair = 1.0 / (2 * seq.t_seq)
    n = lockin_template.samples_per_cycle
    cfg = LockInConfig(
        demod2_freq=f_pair / n,
        cutoff=lockin_template.cutoff,
        filter_order=lockin_template.filter_order,
        samples_per_cycle=n,
    )
    sensor_run = replace(sensor, drive=replace(sensor.drive, delta_f=cfg.demod2_freq))
    res = qpsd_run(sensor_run, seq, signal, cfg, duration, seed)
    n_skip = int(math.ceil(2 * cfg.settle_time * res.demod.sample_rate))
    z = res.demod.samples[n_skip:]
    if len(z) < 16:
        raise ValueError("trace too short after filter settling")
    rate = res.demod.sample_rate
    t0 = res.demod.start_time + n_skip / rate
    phase = np.angle(z)
    pm = fft_magnitude(
        TimeSeries(rate, t0, phase - np.mean(phase)), window="hann"
    )
    mag = np.abs(z)
    mean_mag = np.mean(mag)
    rel = mag / mean_mag - 1.0 if mean_mag > 0 else mag
    am = fft_magnitude(TimeSeries(rate, t0, rel), window="hann")
    return pm, am, cfg, section.reference_freq(seq), len(z) / rate


def measure_section(
    section: Section,
    signal: CompositeSignal,
    sensor: SensorConfig,
    lockin_config: LockInConfig,
    seed: int,
    *,
    duration: float = 10.0,
    t_clk: float | None = None,
    spike_threshold: float = 5.0,
) -> SectionResult:
    """Nominal + perturbed measurement passes for one section.

    lockin_config acts as a template: samples_per_cycle, cutoff, and order
    are kept, while demod2_freq is rebuilt from each run's pair rate.  The
    perturbation t_phi' = t_phi + t_clk (signed t_clk allowed) must move
    the reference by more than twice the matching tolerance of
    3 / duration, otherwise shifts are indistinguishable from bin noise.
    """
    seq_nom = section.sequence()
    step = seq_nom.t_clk if t_clk is None else t_clk
    seq_pert = seq_nom.perturbed(step)
    spec_nom, am_nom, cfg_nom, f_ref_nom, dur_eff = _run_spectrum(
        section, seq_nom, signal, sensor, lockin_config, seed, duration
    )
    half_band = section.half_band if section.half_band is not None else cfg_nom.cutoff
    if half_band > cfg_nom.cutoff * 1.0001:
        raise ValueError(
            f"section half-band {half_band} Hz exceeds the demodulator cutoff "
            f"{cfg_nom.cutoff} Hz; edge tones would fall outside the filter"
        )
    if half_band >= 0.95 * cfg_nom.demod2_freq:
        raise ValueError(
            f"section half-band {half_band} Hz reaches the phase-readout "
            f"limit ~delta_f = {cfg_nom.demod2_freq} Hz; demodulation images "
            "would land inside the band"
        )
    spec_pert, am_pert, _, f_ref_pert, _ = _run_spectrum(
        section, seq_pert, signal, sensor, lockin_config, seed, duration
    )
    resolution = 1.0 / dur_eff
    delta = f_ref_nom - f_ref_pert
    if abs(delta) < 2 * (3 * resolution):
        raise ValueError(
            f"reference shift {delta:.3g} Hz from t_clk={step:.3g} s is below "
            f"twice the matching tolerance {3 * resolution:.3g} Hz; increase "
            "t_clk or the trace duration"
        )
    return SectionResult(
        section=section,
        f_ref_nominal=f_ref_nom,
        f_ref_perturbed=f_ref_pert,
        nominal_spectrum=spec_nom,
        perturbed_spectrum=spec_pert,
        nominal_am=am_nom,
        perturbed_am=am_pert,
        resolution_hz=resolution,
        trace_duration=duration,
        lockin=cfg_nom,
        gamma_e=sensor.gamma_e,
        spike_threshold=spike_threshold,
    )


def _to_tesla(result: SectionResult, amp_rad: float, f_abs: float) -> float:
    seq = result.section.sequence()
    g = filter_closed_form(seq, 2 * math.pi * f_abs).magnitude
    return amp_rad / (result.gamma_e * g)


def _whitened_band(spectrum: Spectrum, band: tuple, lockin: LockInConfig) -> Spectrum:
    """Band slice with the demodulator droop divided out, so the spike
    threshold sees a flat noise floor and edge tones keep full weight.

    The slice is padded by a few bins so a tone at exactly the band edge
    still has neighbors for local-maximum detection and interpolation.
    """
    f = spectrum.frequency_hz
    pad = 4 * (f[1] - f[0])
    mask = (f >= band[0] - pad) & (f <= band[1] + pad)
    if not np.any(mask):
        return Spectrum(np.array([1.0, 2.0]), np.zeros(2), np.zeros(2))
    gain = one_pole_cascade_response(
        f[mask], lockin.cutoff, lockin.filter_order, lockin.sample_rate
    )
    return Spectrum(f[mask], spectrum.amplitude[mask] / gain,
                    spectrum.phase_rad[mask])


def _drop_images(peaks: list, am_spec: Spectrum, lockin: LockInConfig,
                 ratio: float = 0.5) -> tuple:
    """Split peaks into (phase_tones, images) by the AM/PM energy ratio.

    A real field tone modulates only the phase of the demod output; a
    demodulation image carries equal relative amplitude modulation, so
    am/pm >= `ratio` marks an artifact.
    """
    if not peaks:
        return [], []
    f_am = am_spec.frequency_hz
    gain = one_pole_cascade_response(
        f_am, lockin.cutoff, lockin.filter_order, lockin.sample_rate
    )
    a_am = am_spec.amplitude / gain
    df = f_am[1] - f_am[0]
    tones, images = [], []
    for p in peaks:
        i = int(round((p[0] - f_am[0]) / df))
        lo, hi = max(0, i - 1), min(len(a_am), i + 2)
        am_amp = float(np.max(a_am[lo:hi])) if hi > lo else 0.0
        (images if am_amp >= ratio * p[1] else tones).append(p)
    return tones, images


def disambiguate(result: SectionResult, threshold: float | None = None) -> Spectrum:
    """Assign offset signs by matching peaks across the two runs.

    A nominal peak at offset p is confirmed at f_ref + p when the perturbed
    run shows it at |p + delta| (delta = signed reference move), at
    f_ref - p when at |p - delta|.  Peaks matching both candidates are
    marked ambiguous; peaks matching neither (unshifted electronics spikes)
    and demodulation images (AM/PM test) are flagged rejected_noise and
    reported at the lower-side frequency f_ref - p by convention.
    """
    mult = result.spike_threshold if threshold is None else threshold
    half_band = result.section.half_band
    if half_band is None:
        half_band = result.lockin.cutoff
    guard = 4 * result.resolution_hz
    tol = 3 * result.resolution_hz
    delta = result.reference_shift_hz
    nominal = find_peaks(
        _whitened_band(result.nominal_spectrum, (guard, half_band), result.lockin),
        mult, (guard, half_band),
    )
    perturbed = find_peaks(
        _whitened_band(
            result.perturbed_spectrum,
            (guard / 2, half_band + abs(delta) + tol),
            result.lockin,
        ),
        mult, (guard / 2, half_band + abs(delta) + tol),
    )
    nominal, nom_images = _drop_images(nominal, result.nominal_am, result.lockin)
    perturbed, _ = _drop_images(perturbed, result.perturbed_am, result.lockin)
    pert_freqs = np.array([p[0] for p in perturbed]) if perturbed else np.empty(0)

    bins = []
    for p, amp_rad, phase in nom_images:
        f_abs = result.f_ref_nominal - p
        bins.append((f_abs, _to_tesla(result, amp_rad, f_abs), phase, REJECTED_NOISE))
    for p, amp_rad, phase in nominal:
        has_plus = pert_freqs.size and np.any(np.abs(pert_freqs - abs(p + delta)) < tol)
        has_minus = pert_freqs.size and np.any(np.abs(pert_freqs - abs(p - delta)) < tol)
        if has_plus and has_minus:
            status, f_abs = AMBIGUOUS, result.f_ref_nominal + p
        elif has_plus:
            status, f_abs = CONFIRMED, result.f_ref_nominal + p
        elif has_minus:
            status, f_abs = CONFIRMED, result.f_ref_nominal - p
        else:
            status, f_abs = REJECTED_NOISE, result.f_ref_nominal - p
        bins.append((f_abs, _to_tesla(result, amp_rad, f_abs), phase, status))

    bins.sort()
    # strictly increasing frequencies: nudge exact collisions by a micro-step
    out_f, out_a, out_p, out_s = [], [], [], []
    for f_abs, amp, phase, status in bins:
        if out_f and f_abs <= out_f[-1]:
            f_abs = out_f[-1] + 1e-9
        out_f.append(f_abs)
        out_a.append(amp)
        out_p.append(phase)
        out_s.append(status)
    return Spectrum(np.array(out_f), np.array(out_a), np.array(out_p), tuple(out_s))


def merge(results: list) -> Spectrum:
    """Union of the confirmed bins of resolved sections.

    Bins within 2/trace_duration of each other are treated as one tone:
    frequency and amplitude are averaged; amplitude disagreement above 20%
    is flagged with a warning and both bins are retained.
    """
    entries = []
    tol = 0.0
    for r in results:
        if r.resolved is None:
            raise ValueError("disambiguate every section before merging")
        tol = max(tol, 2.0 / r.trace_duration)
        conf = r.resolved.confirmed()
        for f, a, p in zip(conf.frequency_hz, conf.amplitude, conf.phase_rad):
            entries.append((float(f), float(a), float(p)))
    entries.sort()
    out_f, out_a, out_p = [], [], []
    i = 0
    while i < len(entries):
        j = i + 1
        while j < len(entries) and entries[j][0] - entries[j - 1][0] <= tol:
            j += 1
        cluster = entries[i:j]
        amps = [e[1] for e in cluster]
        if len(cluster) > 1 and (max(amps) - min(amps)) > 0.2 * max(amps):
            warnings.warn(
                f"sections disagree on amplitude near {cluster[0][0]:.3f} Hz "
                f"by more than 20%; retaining all {len(cluster)} detections",
                stacklevel=2,
            )
            for f, a, p in cluster:
                out_f.append(f if not out_f or f > out_f[-1] else out_f[-1] + 1e-9)
                out_a.append(a)
                out_p.append(p)
        else:
            out_f.append(float(np.mean([e[0] for e in cluster])))
            out_a.append(float(np.mean(amps)))
            out_p.append(cluster[0][2])
        i = j
    return Spectrum(
        np.array(out_f), np.array(out_a), np.array(out_p),
        (CONFIRMED,) * len(out_f),
    )


def analyze_run(
    plan: AnalyzerPlan,
    signal: CompositeSignal,
    sensor: SensorConfig,
    lockin_template: LockInConfig,
    seed: int,
) -> tuple:
    """Measure, disambiguate, and merge every planned section.

    Returns (merged_spectrum, [SectionResult with .resolved filled]).
    Sections use independent child seeds derived from `seed`.
    """
    children = np.random.SeedSequence(seed).spawn(len(plan.sections))
    results = []
    for section, child in zip(plan.sections, children):
        child_seed = int(child.generate_state(1)[0])
        res = measure_section(
            section, signal, sensor, lockin_template, child_seed,
            duration=plan.trace_duration, t_clk=plan.t_clk,
            spike_threshold=plan.spike_threshold,
        )
        results.append(replace(res, resolved=disambiguate(res)))
    return merge(results), results
