"""Command-line interface: simulate runs, export filter curves, report
sensitivity, run spectrum analyses, and encode/decode audio transport.

Configuration is a single JSON file with units spelled out in key names
(t_phi_us, amplitude_nt, cutoff_hz, ...).  Every run writes a manifest that
embeds the resolved configuration and the SHA-256 of each output file;
feeding a manifest back as --config reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analyzer import AnalyzerPlan, Section, analyze_run, plan_sections
from .audio import (
    AudioClip,
    EncodingConfig,
    encode_melody,
    encode_speech,
    reconstruct_melody,
    reconstruct_speech,
)
from .io import (
    atomic_write_text,
    sha256_file,
    write_demod_csv,
    write_filter_csv,
    write_spectrum_csv,
    write_timeseries_csv,
    write_trace_csv,
)
from .lockin import (
    DemodOutput,
    LockInConfig,
    demod_stage1,
    demod_stage2,
    ldr_db,
    phase_noise,
    sensitivity,
    sensitivity_fluorescence,
)
from .physics import DriveConfig, PulseSequence, filter_curve
from .sensor import NOISE_MODELS, SensorConfig, simulate_run
from .signals import CompositeSignal, SignalComponent

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

NT = 1e-9


class ConfigError(Exception):
    """Configuration problem, reported with the offending key path."""


def _check_keys(d: dict, path: str, allowed: set) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")


def _num(d: dict, path: str, key: str, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(d: dict, path: str, key: str, default=None, required=False):
    v = _num(d, path, key, default, required)
    if v is None:
        return None
    if v != int(v):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v}")
    return int(v)


def parse_sequence(cfg: dict, path: str = "sequence") -> PulseSequence:
    _check_keys(cfg, path, {"kind", "n_pulses", "t_phi_us", "m", "t_clk_ns"})
    kind = cfg.get("kind", "hahn")
    t_phi = _num(cfg, path, "t_phi_us", required=True) * 1e-6
    m = _int(cfg, path, "m", default=1)
    t_clk = _num(cfg, path, "t_clk_ns", default=4.0) * 1e-9
    try:
        if kind == "ramsey":
            return PulseSequence.ramsey(t_phi, m, t_clk=t_clk)
        if kind == "hahn":
            return PulseSequence.hahn(t_phi, m, t_clk=t_clk)
        if kind == "cpmg":
            n = _int(cfg, path, "n_pulses", required=True)
            return PulseSequence.cpmg(n, t_phi, m, t_clk=t_clk)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: must be ramsey, hahn, or cpmg, got {kind!r}")


def parse_drive(cfg: dict, path: str = "drive") -> DriveConfig:
    _check_keys(cfg, path, {"delta_f_hz", "delta_omega_1_rad_s", "delta_omega_2_rad_s",
                            "omega_1_rad_s", "omega_2_rad_s"})
    kw = {}
    if "delta_f_hz" in cfg:
        kw["delta_f"] = _num(cfg, path, "delta_f_hz")
    for src, dst in (("delta_omega_1_rad_s", "delta_omega_1"),
                     ("delta_omega_2_rad_s", "delta_omega_2"),
                     ("omega_1_rad_s", "omega_1"),
                     ("omega_2_rad_s", "omega_2")):
        if src in cfg:
            kw[dst] = _num(cfg, path, src)
    try:
        return DriveConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_sensor(cfg: dict, drive: DriveConfig, path: str = "sensor") -> SensorConfig:
    _check_keys(cfg, path, {"contrast", "photons_per_measurement",
                            "gamma_e_hz_per_nt", "noise_model", "decoherence",
                            "t2_us", "t2_star_us", "phase_interferers"})
    kw = {"drive": drive}
    if "contrast" in cfg:
        kw["contrast"] = _num(cfg, path, "contrast")
    if "photons_per_measurement" in cfg:
        kw["photons_per_measurement"] = _num(cfg, path, "photons_per_measurement")
    if "gamma_e_hz_per_nt" in cfg:
        kw["gamma_e"] = 2 * math.pi * _num(cfg, path, "gamma_e_hz_per_nt") * 1e9
    if "noise_model" in cfg:
        model = cfg["noise_model"]
        if model not in NOISE_MODELS:
            raise ConfigError(f"{path}.noise_model: must be one of {NOISE_MODELS}")
        kw["noise_model"] = model
    if "decoherence" in cfg:
        kw["decoherence"] = bool(cfg["decoherence"])
    if "t2_us" in cfg:
        kw["t2"] = _num(cfg, path, "t2_us") * 1e-6
    if "t2_star_us" in cfg:
        kw["t2_star"] = _num(cfg, path, "t2_star_us") * 1e-6
    if "phase_interferers" in cfg:
        rows = cfg["phase_interferers"]
        if not isinstance(rows, list):
            raise ConfigError(f"{path}.phase_interferers: expected a list")
        kw["phase_interferers"] = tuple(
            (float(r["frequency_hz"]), float(r["amplitude_rad"]),
             float(r.get("phase_rad", 0.0)))
            for r in rows
        )
    try:
        return SensorConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_lockin(cfg: dict, delta_f: float, path: str = "lockin") -> LockInConfig:
    _check_keys(cfg, path, {"cutoff_hz", "filter_order", "samples_per_cycle"})
    try:
        return LockInConfig(
            demod2_freq=delta_f,
            cutoff=_num(cfg, path, "cutoff_hz", required=True),
            filter_order=_int(cfg, path, "filter_order", default=4),
            samples_per_cycle=_int(cfg, path, "samples_per_cycle", default=10),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_component(row: dict, path: str) -> SignalComponent:
    _check_keys(row, path, {"amplitude_nt", "frequency_hz", "phase_rad"})
    try:
        return SignalComponent(
            amplitude=_num(row, path, "amplitude_nt", required=True) * NT,
            frequency=_num(row, path, "frequency_hz", required=True),
            phase=_num(row, path, "phase_rad", default=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_signal(cfg: dict, path: str = "signal") -> CompositeSignal:
    _check_keys(cfg, path, {"components", "schedule"})
    comps = tuple(
        _parse_component(row, f"{path}.components[{i}]")
        for i, row in enumerate(cfg.get("components", []))
    )
    schedule = []
    for i, seg in enumerate(cfg.get("schedule", [])):
        seg_path = f"{path}.schedule[{i}]"
        _check_keys(seg, seg_path, {"start_s", "end_s", "components"})
        seg_comps = tuple(
            _parse_component(row, f"{seg_path}.components[{j}]")
            for j, row in enumerate(seg.get("components", []))
        )
        schedule.append((_num(seg, seg_path, "start_s", required=True),
                         _num(seg, seg_path, "end_s", required=True),
                         seg_comps))
    try:
        return CompositeSignal(components=comps, schedule=tuple(schedule))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def signal_to_dict(signal: CompositeSignal) -> dict:
    def comp_row(c):
        return {"amplitude_nt": c.amplitude / NT, "frequency_hz": c.frequency,
                "phase_rad": c.phase}

    out = {}
    if signal.components:
        out["components"] = [comp_row(c) for c in signal.components]
    if signal.schedule:
        out["schedule"] = [
            {"start_s": a, "end_s": b, "components": [comp_row(c) for c in cs]}
            for a, b, cs in signal.schedule
        ]
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    # a manifest embeds the original config; accept it directly for replay
    if "config" in cfg and "tool" in cfg:
        cfg = cfg["config"]
    return cfg


def _out_dir(args) -> Path:
    if args.out_dir is not None:
        return Path(args.out_dir)
    env = os.environ.get("QPSDSIM_OUT_DIR")
    return Path(env) if env else Path(".")


def write_manifest(path, tool: str, config: dict, outputs: list) -> None:
    manifest = {
        "tool": tool,
        "version": __version__,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": config,
        "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in outputs],
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------- subcommands

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, "top level",
                {"seed", "duration_s", "sequence", "sensor", "drive", "lockin",
                 "signal"})
    seed = _int(cfg, "top level", "seed", default=0)
    duration = _num(cfg, "top level", "duration_s", required=True)
    seq = parse_sequence(cfg.get("sequence", {}))
    drive = parse_drive(cfg.get("drive", {}))
    sensor = parse_sensor(cfg.get("sensor", {}), drive)
    lockin = parse_lockin(cfg.get("lockin", {"cutoff_hz": drive.delta_f / 2.5}),
                          drive.delta_f)
    signal = parse_signal(cfg.get("signal", {}))
    f_pair = 1.0 / (2 * seq.t_seq)
    n_cyc = f_pair / drive.delta_f if drive.delta_f > 0 else None
    if n_cyc is not None and (abs(n_cyc - round(n_cyc)) > 1e-9 or round(n_cyc) % 2):
        raise ConfigError(
            "drive.delta_f_hz: each modulation cycle must contain an even "
            f"integer number of pair samples (pair rate {f_pair} Hz / "
            f"delta_f {drive.delta_f} Hz = {n_cyc:.6g})"
        )
    if n_cyc is not None and round(n_cyc) != lockin.samples_per_cycle:
        raise ConfigError(
            f"lockin.samples_per_cycle: {lockin.samples_per_cycle} does not "
            f"match pair rate / delta_f = {round(n_cyc)}"
        )

    trace = simulate_run(sensor, seq, signal, duration, seed)
    s1 = demod_stage1(trace)
    out = _out_dir(args)
    outputs = [out / "trace.csv", out / "fluorescence.csv"]
    write_trace_csv(outputs[0], trace)
    write_timeseries_csv(outputs[1], s1, {"stage": "demod1"})
    if drive.delta_f > 0:
        demod = demod_stage2(s1, lockin)
        outputs.append(out / "demod.csv")
        write_demod_csv(outputs[-1], demod, {"stage": "demod2",
                                             "delta_f_hz": drive.delta_f})
    write_manifest(out / "manifest.json", "qpsdsim simulate", cfg, outputs)
    print(f"wrote {len(outputs)} file(s) + manifest to {out}")
    return EXIT_OK


def cmd_filter(args) -> int:
    seq_cfg = {"kind": args.kind, "t_phi_us": args.t_phi_us, "m": args.m}
    if args.kind == "cpmg":
        if args.n_pulses is None:
            raise ConfigError("--n-pulses: required for cpmg")
        seq_cfg["n_pulses"] = args.n_pulses
    seq = parse_sequence(seq_cfg, path="filter args")
    if args.f_max_khz <= 0 or args.points < 0:
        raise ConfigError("--f-max-khz must be > 0 and --points >= 0")
    omegas = 2 * np.pi * np.linspace(0.0, args.f_max_khz * 1e3, args.points)
    mag, ph, omag, oph = filter_curve(seq, omegas)
    meta = {"kind": seq.kind, "t_phi_s": seq.t_phi, "m": seq.m}
    write_filter_csv(args.out, omegas, mag, ph, omag, oph, meta)
    print(f"wrote {args.points} filter points to {args.out}")
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, "top level", {"sensor", "drive", "sequence", "lockin", "ldr"})
    drive = parse_drive(cfg.get("drive", {}))
    sensor = parse_sensor(cfg.get("sensor", {}), drive)
    seq = parse_sequence(cfg.get("sequence", {}))
    n_samples = _int(cfg.get("lockin", {}), "lockin", "samples_per_cycle", default=10)
    report = {
        "sequence": seq.kind,
        "t_phi_s": seq.t_phi,
        "t_seq_s": seq.t_seq,
        "phase_noise_rad": phase_noise(sensor, n_samples),
        "sensitivity_t_sqrt_hz": sensitivity(sensor, seq),
        "sensitivity_fluorescence_t_sqrt_hz": sensitivity_fluorescence(sensor, seq),
    }
    if "ldr" in cfg:
        ldr_cfg = cfg["ldr"]
        _check_keys(ldr_cfg, "ldr", {"k_sf_deg_per_nt", "eta_pt_sqrt_hz",
                                     "bandwidth_hz"})
        k_sf = _num(ldr_cfg, "ldr", "k_sf_deg_per_nt", required=True)
        eta = _num(ldr_cfg, "ldr", "eta_pt_sqrt_hz", required=True) * 1e-12
        bw = _num(ldr_cfg, "ldr", "bandwidth_hz", default=1.0)
        try:
            report["ldr_db"] = ldr_db(k_sf, eta, bw)
        except ValueError as exc:
            raise ConfigError(f"ldr: {exc}") from exc
    for key, val in report.items():
        print(f"{key}: {val}")
    if args.out:
        atomic_write_text(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, "top level",
                {"seed", "plan", "sensor", "drive", "lockin", "signal"})
    seed = _int(cfg, "top level", "seed", default=0)
    plan_cfg = cfg.get("plan", {})
    _check_keys(plan_cfg, "plan",
                {"range_lo_hz", "range_hi_hz", "per_section_bw_hz", "f_s_hz",
                 "f_c_lia_hz", "t_clk_ns", "trace_duration_s", "spike_threshold"})
    try:
        plan = plan_sections(
            _num(plan_cfg, "plan", "range_lo_hz", required=True),
            _num(plan_cfg, "plan", "range_hi_hz", required=True),
            _num(plan_cfg, "plan", "per_section_bw_hz", required=True),
            _num(plan_cfg, "plan", "f_s_hz", required=True),
            _num(plan_cfg, "plan", "f_c_lia_hz", required=True),
            t_clk=_num(plan_cfg, "plan", "t_clk_ns", default=4.0) * 1e-9,
            trace_duration=_num(plan_cfg, "plan", "trace_duration_s", default=10.0),
            spike_threshold=_num(plan_cfg, "plan", "spike_threshold", default=5.0),
        )
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from exc
    drive = parse_drive(cfg.get("drive", {}))
    sensor = parse_sensor(cfg.get("sensor", {}), drive)
    lockin = parse_lockin(
        cfg.get("lockin", {"cutoff_hz": plan_cfg.get("f_c_lia_hz", 200.0)}),
        drive.delta_f,
    )
    if args.signal is not None:
        signal = parse_signal(load_config(args.signal), path="signal file")
    else:
        signal = parse_signal(cfg.get("signal", {}))

    merged, results = analyze_run(plan, signal, sensor, lockin, seed)
    out = _out_dir(args)
    outputs = [out / "merged_spectrum.csv"]
    write_spectrum_csv(outputs[0], merged, meta={"sections": len(results)})
    for i, res in enumerate(results):
        p = out / f"section_{i:02d}_resolved.csv"
        write_spectrum_csv(p, res.resolved, meta={
            "center_freq_hz": res.section.center_freq,
            "t_phi_s": res.section.t_phi,
            "m": res.section.m,
            "f_ref_nominal_hz": res.f_ref_nominal,
            "f_ref_perturbed_hz": res.f_ref_perturbed,
        })
        outputs.append(p)
    write_manifest(out / "analyze_manifest.json", "qpsdsim analyze", cfg, outputs)
    confirmed = merged.confirmed()
    print(f"confirmed {len(confirmed)} tone(s) across {len(results)} section(s); "
          f"wrote {out / 'merged_spectrum.csv'}")
    return EXIT_OK


def _audio_common(cfg: dict):
    _check_keys(cfg, "top level", {"mode", "melody", "speech", "sequence",
                                   "drive", "lockin"})
    mode = cfg.get("mode")
    if mode not in ("melody", "speech"):
        raise ConfigError("mode: must be 'melody' or 'speech'")
    return mode


def cmd_audio_encode(args) -> int:
    cfg = load_config(args.config)
    mode = _audio_common(cfg)
    if mode == "melody":
        mel = cfg.get("melody", {})
        _check_keys(mel, "melody", {"notes_hz", "note_duration_s", "carrier_hz",
                                    "reference_hz", "field_scale_nt",
                                    "reconstruction_carrier_hz", "notch_q"})
        notes = mel.get("notes_hz")
        if not isinstance(notes, list) or not notes:
            raise ConfigError("melody.notes_hz: non-empty list required")
        signal, enc = encode_melody(
            [float(n) for n in notes],
            carrier=_num(mel, "melody", "carrier_hz", default=9500.0),
            reference_freq=_num(mel, "melody", "reference_hz", default=10e3),
            note_duration=_num(mel, "melody", "note_duration_s", default=0.8),
            field_scale=_num(mel, "melody", "field_scale_nt", default=40.0) * NT,
            reconstruction_carrier=_num(mel, "melody",
                                        "reconstruction_carrier_hz", default=500.0),
            notch_q=_num(mel, "melody", "notch_q", default=30.0),
        )
        broadcast = None
    else:
        sp = cfg.get("speech", {})
        _check_keys(sp, "speech", {"compression_factor", "carrier_hz",
                                   "field_scale_nt", "broadcast_rate_hz"})
        if args.infile is None:
            raise ConfigError("--in: a WAV file is required for speech encoding")
        try:
            clip = AudioClip.from_wav(args.infile)
        except (OSError, EOFError) as exc:
            raise OSError(f"cannot read {args.infile}: {exc}") from exc
        except Exception as exc:
            raise ConfigError(f"--in {args.infile}: {exc}") from exc
        signal, enc, broadcast = encode_speech(
            clip,
            _int(sp, "speech", "compression_factor", default=20),
            carrier=_num(sp, "speech", "carrier_hz", default=10e3),
            field_scale=_num(sp, "speech", "field_scale_nt", default=40.0) * NT,
        )
    payload = {
        "encoding": {
            "mode": mode,
            "carrier_hz": enc.carrier,
            "compression_factor": enc.compression_factor,
            "reconstruction_carrier_hz": enc.reconstruction_carrier,
            "notch_freqs_hz": list(enc.notch_freqs),
            "notch_q": enc.notch_q,
            "expected_readout_freqs_hz": list(enc.expected_readout_freqs),
            "field_scale_nt": enc.field_scale / NT,
        },
        "signal": signal_to_dict(signal),
    }
    atomic_write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.broadcast_wav and broadcast is not None:
        broadcast.normalized().to_wav(args.broadcast_wav)
    n_tones = len(signal.components) + sum(len(cs) for _, _, cs in signal.schedule)
    print(f"encoded {mode} signal with {n_tones} tone(s) to {args.out}")
    return EXIT_OK


def _read_demod_csv(path) -> DemodOutput:
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header = json.loads(line[1:].strip())
                continue
            if line.startswith("t_seconds"):
                continue
            parts = line.split(",")
            rows.append((float(parts[1]), float(parts[2])))
    if not rows:
        raise ConfigError(f"{path}: no demod samples found")
    rate = float(header.get("sample_rate_hz", 0.0))
    start = float(header.get("start_time_s", 0.0))
    if rate <= 0:
        raise ConfigError(f"{path}: missing sample_rate_hz header")
    z = np.array([x + 1j * y for x, y in rows])
    return DemodOutput(rate, start, z)


def cmd_audio_decode(args) -> int:
    cfg = load_config(args.config)
    if "encoding" in cfg:  # accept an audio-encode output file directly
        enc_cfg = cfg["encoding"]
        mode = enc_cfg.get("mode")
    else:
        mode = _audio_common(cfg)
        enc_cfg = dict(cfg.get(mode, {}))
    demod = _read_demod_csv(args.readout)
    if mode == "melody":
        enc = EncodingConfig(
            carrier=float(enc_cfg.get("carrier_hz", 9500.0)),
            reconstruction_carrier=float(
                enc_cfg.get("reconstruction_carrier_hz", 500.0)),
            notch_freqs=tuple(enc_cfg.get("notch_freqs_hz", ())),
            notch_q=float(enc_cfg.get("notch_q", 30.0)),
            expected_readout_freqs=tuple(
                enc_cfg.get("expected_readout_freqs_hz", ())),
        )
        clip = reconstruct_melody(demod, enc)
    elif mode == "speech":
        clip = reconstruct_speech(
            demod,
            int(enc_cfg.get("compression_factor", 20)),
            broadcast_rate=float(enc_cfg.get("broadcast_rate_hz", 1e5)),
        )
    else:
        raise ConfigError("mode: must be 'melody' or 'speech'")
    clip.to_wav(args.out)
    print(f"decoded {mode} audio ({clip.duration:.3f} s at "
          f"{clip.sample_rate:.0f} Hz) to {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------ driver

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpsdsim",
        description="Phase-modulated quantum magnetometry simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a readout run and demodulate")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="export filter-function curves as CSV")
    p.add_argument("--kind", choices=["ramsey", "hahn", "cpmg"], default="hahn")
    p.add_argument("--n-pulses", type=int, default=None)
    p.add_argument("--t-phi-us", type=float, required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--f-max-khz", type=float, required=True)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sensitivity", help="report phase noise, sensitivity, LDR")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("analyze", help="multi-section spectrum analysis")
    p.add_argument("--config", required=True)
    p.add_argument("--signal", default=None,
                   help="signal definition JSON (overrides config.signal)")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("audio-encode", help="encode audio as a field signal")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--broadcast-wav", default=None)
    p.set_defaults(func=cmd_audio_encode)

    p = sub.add_parser("audio-decode", help="reconstruct audio from a demod CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--readout", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audio_decode)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # invariant violation; report, never traceback
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
