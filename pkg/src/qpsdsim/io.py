"""CSV serialization of traces, series, demod outputs, and spectra.

All writers are atomic (temp file + rename) and emit '#'-prefixed header
comments carrying the generating configuration, so a written file together
with its manifest reproduces the run.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .lockin import DemodOutput
from .sensor import ReadoutTrace
from .signals import Spectrum, TimeSeries


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(x: float) -> str:
    return repr(float(x))


def _render_csv(header_meta: dict | None, columns: list, rows) -> str:
    buf = _io.StringIO()
    if header_meta:
        buf.write("# " + json.dumps(header_meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def write_trace_csv(path, trace: ReadoutTrace) -> None:
    rows = (
        (i, _fmt(i * trace.pair_period), _fmt(fp), _fmt(fm))
        for i, (fp, fm) in enumerate(trace.counts)
    )
    meta = dict(trace.meta)
    meta["pair_period_s"] = trace.pair_period
    meta["rng_seed"] = trace.rng_seed
    atomic_write_text(
        path, _render_csv(meta, ["index", "t_seconds", "f_plus", "f_minus"], rows)
    )


def write_timeseries_csv(path, series: TimeSeries, meta: dict | None = None) -> None:
    rows = ((_fmt(t), _fmt(v)) for t, v in zip(series.times, series.values))
    header = {"sample_rate_hz": series.sample_rate, "start_time_s": series.start_time}
    if meta:
        header.update(meta)
    atomic_write_text(path, _render_csv(header, ["t_seconds", "value"], rows))


def write_demod_csv(path, demod: DemodOutput, meta: dict | None = None) -> None:
    rows = (
        (_fmt(t), _fmt(z.real), _fmt(z.imag), _fmt(ph), _fmt(abs(z)))
        for t, z, ph in zip(demod.times, demod.samples, demod.phase)
    )
    header = {"sample_rate_hz": demod.sample_rate, "start_time_s": demod.start_time}
    if meta:
        header.update(meta)
    atomic_write_text(
        path, _render_csv(header, ["t_seconds", "x", "y", "phase_rad", "amplitude"], rows)
    )


def write_spectrum_csv(path, spectrum: Spectrum, amplitude_unit: str = "tesla",
                       meta: dict | None = None) -> None:
    rows = (
        (_fmt(f), _fmt(a), _fmt(p), s)
        for f, a, p, s in zip(
            spectrum.frequency_hz, spectrum.amplitude, spectrum.phase_rad,
            spectrum.sign_status,
        )
    )
    cols = ["frequency_hz", f"amplitude_{amplitude_unit}", "phase_rad", "sign_status"]
    atomic_write_text(path, _render_csv(meta, cols, rows))


def read_spectrum_csv(path) -> Spectrum:
    freqs, amps, phases, statuses = [], [], [], []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        freqs.append(float(row[0]))
        amps.append(float(row[1]))
        phases.append(float(row[2]))
        statuses.append(row[3])
    return Spectrum(np.array(freqs), np.array(amps), np.array(phases), tuple(statuses))


def write_filter_csv(path, omegas, magnitude, phase, oracle_magnitude=None,
                     oracle_phase=None, meta: dict | None = None) -> None:
    cols = ["omega_rad_s", "magnitude_s", "phase_rad"]
    arrays = [omegas, magnitude, phase]
    if oracle_magnitude is not None:
        cols += ["oracle_magnitude_s", "oracle_phase_rad"]
        arrays += [oracle_magnitude, oracle_phase]
    rows = (tuple(_fmt(c) for c in row) for row in zip(*arrays))
    atomic_write_text(path, _render_csv(meta, cols, rows))
