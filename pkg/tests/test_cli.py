"""CLI tests: exit codes, file outputs, validation messages, reproducibility."""

import json
import math

import numpy as np
import pytest

from qpsdsim.cli import main
from qpsdsim.io import read_spectrum_csv, sha256_file


def write_cfg(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def simulate_cfg(delta_f=500.0, samples_per_cycle=10, t_phi_us=50.0, m=2):
    return {
        "seed": 7,
        "duration_s": 0.2,
        "sequence": {"kind": "hahn", "t_phi_us": t_phi_us, "m": m},
        "drive": {"delta_f_hz": delta_f},
        "sensor": {"contrast": 0.1, "photons_per_measurement": 1e5,
                   "noise_model": "auto"},
        "lockin": {"cutoff_hz": 100.0, "filter_order": 4,
                   "samples_per_cycle": samples_per_cycle},
        "signal": {"components": [
            {"amplitude_nt": 1.0, "frequency_hz": 20005.0, "phase_rad": 0.0}
        ]},
    }


def test_simulate_minimal_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "cfg.json", simulate_cfg())
    rc = main(["simulate", "--config", cfg, "--out-dir", str(tmp_path / "out")])
    assert rc == 0
    assert (tmp_path / "out" / "trace.csv").exists()
    assert (tmp_path / "out" / "demod.csv").exists()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["tool"] == "qpsdsim simulate"
    assert len(manifest["outputs"]) == 3


def test_simulate_rejects_odd_samples_per_cycle(tmp_path, capsys):
    # delta_f of 1000 Hz gives 5 samples per cycle at a 5 kHz pair rate
    cfg = write_cfg(tmp_path / "cfg.json", simulate_cfg(delta_f=1000.0,
                                                        samples_per_cycle=5))
    rc = main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "even" in err


def test_simulate_rejects_unknown_key(tmp_path, capsys):
    raw = simulate_cfg()
    raw["sensor"]["contrastt"] = 0.2
    cfg = write_cfg(tmp_path / "cfg.json", raw)
    rc = main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "contrastt" in capsys.readouterr().err


def test_simulate_manifest_replay_is_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path / "cfg.json", simulate_cfg())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out-dir", str(out1)]) == 0
    manifest = out1 / "manifest.json"
    assert main(["simulate", "--config", str(manifest), "--out-dir", str(out2)]) == 0
    for name in ("trace.csv", "fluorescence.csv", "demod.csv"):
        assert sha256_file(out1 / name) == sha256_file(out2 / name)


def test_simulate_missing_config_is_io_error(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "nope.json"),
               "--out-dir", str(tmp_path)])
    assert rc == 3


def test_simulate_invalid_json_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"seed": 1,\n  "duration_s":::\n}')
    rc = main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "line 2" in capsys.readouterr().err


def test_filter_curve_hahn_equal_response_at_10_and_20_khz(tmp_path):
    out = tmp_path / "filter.csv"
    # 0..40 kHz in 1 kHz steps: bins at exactly 10 and 20 kHz
    rc = main(["filter", "--kind", "hahn", "--t-phi-us", "50", "--m", "2",
               "--f-max-khz", "40", "--points", "41", "--out", str(out)])
    assert rc == 0
    rows = [r.split(",") for r in out.read_text().splitlines()
            if r and not r.startswith("#")][1:]
    omegas = np.array([float(r[0]) for r in rows])
    mags = np.array([float(r[1]) for r in rows])
    oracle = np.array([float(r[3]) for r in rows])
    i10 = int(np.argmin(np.abs(omegas - 2 * np.pi * 10e3)))
    i20 = int(np.argmin(np.abs(omegas - 2 * np.pi * 20e3)))
    assert mags[i10] == pytest.approx(mags[i20], rel=1e-9)
    assert mags[i10] == pytest.approx(2 * 50e-6 / math.pi, rel=1e-9)
    assert np.allclose(mags, oracle, rtol=1e-7, atol=1e-15)


def test_filter_empty_range_header_only(tmp_path):
    out = tmp_path / "empty.csv"
    rc = main(["filter", "--kind", "hahn", "--t-phi-us", "50",
               "--f-max-khz", "40", "--points", "0", "--out", str(out)])
    assert rc == 0
    lines = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
    assert lines == ["omega_rad_s,magnitude_s,phase_rad,"
                     "oracle_magnitude_s,oracle_phase_rad"]


def test_filter_cpmg2_zeros_at_sine_roots(tmp_path):
    out = tmp_path / "cpmg2.csv"
    rc = main(["filter", "--kind", "cpmg", "--n-pulses", "2", "--t-phi-us", "50",
               "--f-max-khz", "81", "--points", "82", "--out", str(out)])
    assert rc == 0
    rows = [r.split(",") for r in out.read_text().splitlines()
            if r and not r.startswith("#")][1:]
    omegas = np.array([float(r[0]) for r in rows])
    mags = np.array([float(r[1]) for r in rows])
    t_phi = 50e-6
    # zeros where sin(w t_phi / 4) = 0: w = 4 pi k / t_phi (40 kHz, 80 kHz)
    for k in (1, 2):
        i = int(np.argmin(np.abs(omegas - 4 * np.pi * k / t_phi)))
        assert mags[i] < 1e-12


def test_sensitivity_report_paper_values(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "s.json", {
        "sequence": {"kind": "hahn", "t_phi_us": 50.0, "m": 2},
        "sensor": {"contrast": 0.0019, "photons_per_measurement": 4.6e11},
        "lockin": {"samples_per_cycle": 10},
        "ldr": {"k_sf_deg_per_nt": 0.071, "eta_pt_sqrt_hz": 31.0,
                "bandwidth_hz": 1.0},
    })
    out = tmp_path / "report.json"
    rc = main(["sensitivity", "--config", cfg, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["sensitivity_t_sqrt_hz"] == pytest.approx(4e-12, rel=0.05)
    assert report["sensitivity_t_sqrt_hz"] / report[
        "sensitivity_fluorescence_t_sqrt_hz"] == pytest.approx(math.sqrt(2))
    assert report["ldr_db"] == pytest.approx(98.0, abs=0.5)
    assert report["phase_noise_rad"] == pytest.approx(4.9e-4, rel=0.01)


def test_analyze_no_signal_empty_confirmed(tmp_path):
    cfg = write_cfg(tmp_path / "a.json", {
        "seed": 5,
        "plan": {"range_lo_hz": 19915.0, "range_hi_hz": 20085.0,
                 "per_section_bw_hz": 170.0, "f_s_hz": 5000.0,
                 "f_c_lia_hz": 200.0, "t_clk_ns": 16.0,
                 "trace_duration_s": 2.0},
        "drive": {"delta_f_hz": 500.0},
        "sensor": {"contrast": 0.1, "photons_per_measurement": 1e5},
        "lockin": {"cutoff_hz": 200.0, "samples_per_cycle": 10},
        "signal": {},
    })
    out = tmp_path / "out"
    rc = main(["analyze", "--config", cfg, "--out-dir", str(out)])
    assert rc == 0
    merged = read_spectrum_csv(out / "merged_spectrum.csv")
    assert len(merged) == 0


def test_analyze_recovers_tone_from_signal_file(tmp_path):
    cfg = write_cfg(tmp_path / "a.json", {
        "seed": 5,
        "plan": {"range_lo_hz": 19915.0, "range_hi_hz": 20085.0,
                 "per_section_bw_hz": 170.0, "f_s_hz": 5000.0,
                 "f_c_lia_hz": 200.0, "t_clk_ns": 16.0,
                 "trace_duration_s": 2.0},
        "drive": {"delta_f_hz": 500.0},
        "sensor": {"contrast": 0.1, "photons_per_measurement": 1e6,
                   "noise_model": "none"},
        "lockin": {"cutoff_hz": 200.0, "samples_per_cycle": 10},
    })
    sig = write_cfg(tmp_path / "sig.json", {
        "components": [{"amplitude_nt": 1.0, "frequency_hz": 20030.0}],
    })
    out = tmp_path / "out"
    rc = main(["analyze", "--config", cfg, "--signal", sig,
               "--out-dir", str(out)])
    assert rc == 0
    merged = read_spectrum_csv(out / "merged_spectrum.csv")
    assert len(merged) == 1
    assert merged.frequency_hz[0] == pytest.approx(20030.0, abs=1.0)


def test_audio_encode_decode_melody_roundtrip(tmp_path):
    audio_cfg = write_cfg(tmp_path / "audio.json", {
        "mode": "melody",
        "melody": {"notes_hz": [523.0, 587.0, 659.0], "note_duration_s": 0.6,
                   "field_scale_nt": 40.0},
    })
    sig_path = tmp_path / "signal.json"
    rc = main(["audio-encode", "--config", audio_cfg, "--out", str(sig_path)])
    assert rc == 0
    payload = json.loads(sig_path.read_text())
    assert payload["encoding"]["mode"] == "melody"
    assert len(payload["signal"]["schedule"]) == 3

    # simulate the transported field, then decode the demod CSV back to audio
    sim_cfg = write_cfg(tmp_path / "sim.json", {
        "seed": 3,
        "duration_s": 1.8,
        "sequence": {"kind": "hahn", "t_phi_us": 50.0, "m": 2},
        "drive": {"delta_f_hz": 500.0},
        "sensor": {"contrast": 0.1, "photons_per_measurement": 1e6,
                   "noise_model": "none"},
        "lockin": {"cutoff_hz": 200.0, "samples_per_cycle": 10},
        "signal": payload["signal"],
    })
    out = tmp_path / "run"
    assert main(["simulate", "--config", sim_cfg, "--out-dir", str(out)]) == 0
    wav = tmp_path / "decoded.wav"
    rc = main(["audio-decode", "--config", str(sig_path),
               "--readout", str(out / "demod.csv"), "--out", str(wav)])
    assert rc == 0
    from qpsdsim.audio import AudioClip
    clip = AudioClip.from_wav(wav)
    assert clip.sample_rate == pytest.approx(5000.0)
    assert np.max(np.abs(clip.samples)) > 0.5  # reconstruction active


def test_audio_encode_speech_requires_input(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "audio.json", {
        "mode": "speech", "speech": {"compression_factor": 20},
    })
    rc = main(["audio-encode", "--config", cfg, "--out", str(tmp_path / "s.json")])
    assert rc == 2
    assert "--in" in capsys.readouterr().err


def test_env_var_output_dir(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "cfg.json", simulate_cfg())
    dest = tmp_path / "from_env"
    monkeypatch.setenv("QPSDSIM_OUT_DIR", str(dest))
    assert main(["simulate", "--config", cfg]) == 0
    assert (dest / "trace.csv").exists()
