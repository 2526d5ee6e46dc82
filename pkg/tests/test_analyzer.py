"""Tests for section planning, heterodyne measurement, sign disambiguation,
spike rejection, and spectrum merging."""

import math
from dataclasses import replace

import numpy as np
import pytest

from qpsdsim.analyzer import (
    AnalyzerPlan,
    Section,
    SectionResult,
    analyze_run,
    disambiguate,
    find_peaks,
    measure_section,
    merge,
    plan_sections,
)
from qpsdsim.lockin import LockInConfig
from qpsdsim.physics import DriveConfig, filter_closed_form
from qpsdsim.sensor import SensorConfig
from qpsdsim.signals import (
    AMBIGUOUS,
    CONFIRMED,
    REJECTED_NOISE,
    CompositeSignal,
    SignalComponent,
    Spectrum,
)

NT = 1e-9


def noise_free_sensor(**kw):
    return SensorConfig(
        contrast=0.1,
        photons_per_measurement=1e6,
        drive=DriveConfig(delta_f=500.0),
        noise_model="none",
        **kw,
    )


# wide template for m<=2 sections (pair rate ~5-12 kHz, delta_f >= 375 Hz)
WIDE = LockInConfig(demod2_freq=500.0, cutoff=200.0, samples_per_cycle=10)
# narrow template for m=10 sections at 20 kHz (pair rate 1 kHz, delta_f 100 Hz)
NARROW = LockInConfig(demod2_freq=100.0, cutoff=40.0, samples_per_cycle=10)


# ------------------------------------------------------------------ planning

def test_plan_sections_fig4d_analogue():
    plan = plan_sections(10e3, 15e3, 800.0, 5e3, 400.0)
    assert len(plan.sections) == math.ceil(5000 / 800) == 7
    # coverage: every frequency in range within half_band of some center
    for f in np.linspace(10e3, 15e3, 101):
        assert any(
            abs(f - s.center_freq) <= s.half_band + 1e-9 for s in plan.sections
        )
    for s in plan.sections:
        # center on the sequence comb
        k = s.center_freq * s.m * s.t_phi
        assert k == pytest.approx(round(k), abs=1e-9)


def test_plan_single_point_range():
    plan = plan_sections(12e3, 12e3, 800.0, 5e3, 400.0)
    assert len(plan.sections) == 1
    assert plan.sections[0].center_freq == pytest.approx(12e3 + 400.0)


def test_plan_rejects_bandwidth_beyond_lia_passband():
    with pytest.raises(ValueError, match="passband"):
        plan_sections(10e3, 15e3, 900.0, 5e3, 400.0)


def test_plan_rejects_infeasible_alias_coverage():
    # a 30 kHz span cannot fit any section's alias-free window at f_s ~ 2 kHz
    with pytest.raises(ValueError, match="alias-free"):
        plan_sections(5e3, 35e3, 700.0, 2e3, 400.0)


def test_section_at_constructors():
    s = Section.at(20e3, m=10)
    assert s.t_phi == pytest.approx(50e-6)
    assert s.epsilon == 0
    # half-harmonic trick: 10 kHz reference from t_phi = 50 us via eps = -1
    s2 = Section.at(10e3, m=2, epsilon=-1)
    assert s2.t_phi == pytest.approx(50e-6)
    with pytest.raises(ValueError):
        Section.at(10e3, m=1, epsilon=-1)
    with pytest.raises(ValueError):
        Section(10e3, 50e-6, 2, epsilon=0)  # center not on comb for eps=0


# -------------------------------------------------------------- measurement

def tone(freq, amp_nt=1.0, phase=0.0):
    return SignalComponent(amp_nt * NT, freq, phase)


def test_measure_section_paper_heterodyne_shifts():
    """20.005 kHz: 5.0 Hz nominal peak, 6.6 Hz perturbed; 19.995 kHz: 3.4 Hz
    perturbed.  t_phi 50 us shifted by +4 ns moves the 20 kHz reference down
    by 1.6 Hz."""
    section = Section.at(20e3, m=10, half_band=40.0)
    sensor = noise_free_sensor()
    sig_hi = CompositeSignal(components=(tone(20005.0),))
    res_hi = measure_section(
        section, sig_hi, sensor, NARROW, seed=1, duration=10.0, t_clk=4e-9
    )
    assert res_hi.reference_shift_hz == pytest.approx(1.6, abs=0.01)
    tol = res_hi.resolution_hz
    peaks_nom = find_peaks(res_hi.nominal_spectrum, 5.0, (1.0, 40.0))
    peaks_pert = find_peaks(res_hi.perturbed_spectrum, 5.0, (1.0, 50.0))
    assert min(abs(p[0] - 5.0) for p in peaks_nom) < tol
    assert min(abs(p[0] - 6.6) for p in peaks_pert) < tol

    sig_lo = CompositeSignal(components=(tone(19995.0),))
    res_lo = measure_section(
        section, sig_lo, sensor, NARROW, seed=2, duration=10.0, t_clk=4e-9
    )
    peaks_nom = find_peaks(res_lo.nominal_spectrum, 5.0, (1.0, 40.0))
    peaks_pert = find_peaks(res_lo.perturbed_spectrum, 5.0, (1.0, 50.0))
    assert min(abs(p[0] - 5.0) for p in peaks_nom) < tol
    assert min(abs(p[0] - 3.4) for p in peaks_pert) < tol

    spec_hi = disambiguate(res_hi)
    conf = spec_hi.confirmed()
    assert len(conf) == 1
    assert conf.frequency_hz[0] == pytest.approx(20005.0, abs=2 * tol)
    spec_lo = disambiguate(res_lo)
    conf = spec_lo.confirmed()
    assert len(conf) == 1
    assert conf.frequency_hz[0] == pytest.approx(19995.0, abs=2 * tol)


def test_measure_section_rejects_tiny_perturbation():
    section = Section.at(20e3, m=10, half_band=40.0)
    with pytest.raises(ValueError, match="tolerance"):
        measure_section(
            section, CompositeSignal(components=(tone(20005.0),)),
            noise_free_sensor(), NARROW, seed=1,
            duration=2.0, t_clk=1e-11,
        )


def test_amplitude_fidelity_with_droop_compensation():
    """Recovered amplitude sits within the demodulator droop bound of truth
    (compensation makes it tighter than the bound)."""
    section = Section.at(20e3, m=10, half_band=40.0)
    sensor = noise_free_sensor()
    offsets = (5.0, 30.0)
    sig = CompositeSignal(components=tuple(tone(20e3 + o) for o in offsets))
    res = measure_section(section, sig, sensor, NARROW, seed=3,
                          duration=10.0, t_clk=4e-9)
    spec = disambiguate(res).confirmed()
    assert len(spec) == 2
    for o in offsets:
        i = int(np.argmin(np.abs(spec.frequency_hz - (20e3 + o))))
        rel_err = abs(spec.amplitude[i] - 1 * NT) / (1 * NT)
        from qpsdsim.lockin import lowpass_response
        droop_bound = 1.0 - lowpass_response(o, NARROW.cutoff,
                                             NARROW.filter_order)
        assert rel_err <= max(0.02, droop_bound)
        assert rel_err <= 0.02  # compensation beats the raw droop bound


def test_interferer_flagged_rejected_noise():
    """A fixed 70 Hz electronics line does not shift with the sequence and
    is excluded; the real tone survives."""
    section = Section.at(10e3, m=2, epsilon=-1, half_band=200.0)
    sensor = noise_free_sensor(phase_interferers=((70.0, 2e-3, 0.3),))
    sig = CompositeSignal(components=(tone(10040.0),))
    res = measure_section(section, sig, sensor, WIDE, seed=4,
                          duration=10.0, t_clk=16e-9)
    spec = disambiguate(res)
    statuses = dict(zip(spec.frequency_hz, spec.sign_status))
    rejected = [f for f, s in statuses.items() if s == REJECTED_NOISE]
    confirmed = [f for f, s in statuses.items() if s == CONFIRMED]
    assert len(confirmed) == 1
    assert confirmed[0] == pytest.approx(10040.0, abs=0.5)
    # rejected line reported at the lower-side mapping f_ref - 70 = 9930 Hz
    assert len(rejected) == 1
    assert rejected[0] == pytest.approx(9930.0, abs=0.5)


def test_mirror_pair_marked_ambiguous():
    """Tones at f_ref +/- p fold onto one readout peak; the perturbed run
    shows both shift directions, which must not be silently resolved."""
    section = Section.at(20e3, m=2, half_band=200.0)
    sensor = noise_free_sensor()
    # distinct phases: an equal-phase mirror pair can fold destructively
    sig = CompositeSignal(components=(tone(20e3 + 25.0, phase=0.3),
                                      tone(20e3 - 25.0, phase=-0.9)))
    res = measure_section(section, sig, sensor, WIDE, seed=5,
                          duration=10.0, t_clk=16e-9)
    spec = disambiguate(res)
    assert AMBIGUOUS in spec.sign_status
    assert CONFIRMED not in spec.sign_status


def test_no_signal_yields_no_confirmed_bins():
    section = Section.at(20e3, m=2, half_band=200.0)
    sensor = SensorConfig(contrast=0.1, photons_per_measurement=1e5,
                          drive=DriveConfig(delta_f=500.0))
    res = measure_section(section, CompositeSignal(), sensor, WIDE,
                          seed=6, duration=5.0, t_clk=16e-9)
    spec = disambiguate(res)
    assert CONFIRMED not in spec.sign_status


def test_sign_correctness_hundred_random_tones():
    """100 noise-free random tones on both sides of random references all
    get the correct sign.  Absolute offsets are placed on separated slots
    with random signs, which keeps tones resolvable and non-mirror (genuine
    mirror pairs are ambiguous by construction)."""
    rng = np.random.default_rng(99)
    t_clk = 12e-9
    total = 0
    for section_idx in range(25):
        center = rng.uniform(15e3, 25e3)
        section = Section.at(center, m=2, half_band=150.0)
        # distinct |offset| slots with random signs: any two tones are then
        # separated by at least the slot gap in both x-y and x+y
        slots = np.linspace(14.0, 140.0, 4) + rng.uniform(-3.0, 3.0, size=4)
        offsets = [float(s) * int(sgn) for s, sgn in
                   zip(slots, rng.choice([-1, 1], size=4))]
        sig = CompositeSignal(
            components=tuple(tone(section.center_freq + x,
                                  amp_nt=rng.uniform(0.5, 2.0),
                                  phase=rng.uniform(-np.pi, np.pi))
                             for x in offsets)
        )
        res = measure_section(section, sig, noise_free_sensor(), WIDE,
                              seed=1000 + section_idx, duration=3.0, t_clk=t_clk)
        spec = disambiguate(res).confirmed()
        assert len(spec) == len(offsets)
        for x in offsets:
            f_true = section.center_freq + x
            err = np.min(np.abs(spec.frequency_hz - f_true))
            assert err < 2.0 / res.trace_duration
        total += len(offsets)
    assert total == 100


# ------------------------------------------------------------------- merging

def synthetic_result(freqs, amps, duration=10.0):
    spec = Spectrum(
        np.asarray(freqs, dtype=float),
        np.asarray(amps, dtype=float),
        np.zeros(len(freqs)),
        (CONFIRMED,) * len(freqs),
    )
    section = Section.at(float(np.mean(freqs)), m=10, half_band=400.0)
    dummy = Spectrum(np.array([1.0]), np.array([0.0]), np.array([0.0]))
    return SectionResult(
        section=section,
        f_ref_nominal=section.center_freq,
        f_ref_perturbed=section.center_freq - 1.6,
        nominal_spectrum=dummy,
        perturbed_spectrum=dummy,
        nominal_am=dummy,
        perturbed_am=dummy,
        resolution_hz=1.0 / duration,
        trace_duration=duration,
        lockin=WIDE,
        gamma_e=1.0,
        resolved=spec,
    )


def test_merge_single_section_identity():
    r = synthetic_result([100.0, 200.0], [1.0, 2.0])
    out = merge([r])
    assert np.allclose(out.frequency_hz, [100.0, 200.0])
    assert np.allclose(out.amplitude, [1.0, 2.0])


def test_merge_deduplicates_overlap():
    r1 = synthetic_result([100.0, 200.0], [1.0, 2.0])
    r2 = synthetic_result([200.05, 300.0], [2.02, 3.0])  # 200.05 within 2/10 s tol
    out = merge([r1, r2])
    assert len(out) == 3
    i = int(np.argmin(np.abs(out.frequency_hz - 200.0)))
    assert out.frequency_hz[i] == pytest.approx(200.025, abs=1e-6)
    assert out.amplitude[i] == pytest.approx(2.01, abs=1e-9)


def test_merge_flags_conflicting_amplitudes():
    r1 = synthetic_result([200.0], [1.0])
    r2 = synthetic_result([200.05], [2.0])  # 2x disagreement
    with pytest.warns(UserWarning, match="disagree"):
        out = merge([r1, r2])
    assert len(out) == 2  # both retained


def test_merge_requires_resolved():
    r = synthetic_result([100.0], [1.0])
    r = replace(r, resolved=None)
    with pytest.raises(ValueError):
        merge([r])


def test_merge_ignores_rejected_and_ambiguous():
    spec = Spectrum(
        np.array([100.0, 150.0, 200.0]),
        np.array([1.0, 1.0, 1.0]),
        np.zeros(3),
        (CONFIRMED, REJECTED_NOISE, AMBIGUOUS),
    )
    r = replace(synthetic_result([100.0], [1.0]), resolved=spec)
    out = merge([r])
    assert len(out) == 1
    assert out.frequency_hz[0] == pytest.approx(100.0)


# --------------------------------------------------------------- end to end

def test_analyze_run_multisection_recovers_tones():
    plan = plan_sections(10e3, 12e3, 800.0, 5e3, 400.0,
                         trace_duration=4.0, t_clk=16e-9)
    rng = np.random.default_rng(17)
    freqs = [10300.0, 10950.0, 11600.0]
    sig = CompositeSignal(components=tuple(tone(f, amp_nt=1.0) for f in freqs))
    sensor = noise_free_sensor()
    lockin = LockInConfig(demod2_freq=500.0, cutoff=400.0, samples_per_cycle=10)
    merged, results = analyze_run(plan, sig, sensor, lockin, seed=11)
    assert len(results) == len(plan.sections)
    for f in freqs:
        err = np.min(np.abs(merged.frequency_hz - f))
        assert err < 2.0 / plan.trace_duration
