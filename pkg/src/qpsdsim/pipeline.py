"""Convenience wiring of sensor simulation through both demodulation stages."""

from __future__ import annotations

from dataclasses import dataclass

from .lockin import DemodOutput, LockInConfig, demod_stage1, demod_stage2
from .physics import PulseSequence
from .sensor import ReadoutTrace, SensorConfig, simulate_run
from .signals import CompositeSignal, TimeSeries


@dataclass(frozen=True)
class RunResult:
    trace: ReadoutTrace
    fluorescence: TimeSeries  # stage-1 output
    demod: DemodOutput        # stage-2 output


def qpsd_run(
    sensor: SensorConfig,
    seq: PulseSequence,
    signal: CompositeSignal,
    lockin: LockInConfig,
    duration: float,
    seed: int,
) -> RunResult:
    """Simulate, pair-difference, and demodulate one run.

    The sensor's drive delta_f must equal the lock-in demod2_freq; the pair
    rate implied by the sequence must be samples_per_cycle * demod2_freq.
    """
    if abs(sensor.drive.delta_f - lockin.demod2_freq) > 1e-9 * lockin.demod2_freq:
        raise ValueError(
            f"drive delta_f={sensor.drive.delta_f} Hz != lock-in "
            f"demod2_freq={lockin.demod2_freq} Hz"
        )
    f_pair = 1.0 / (2 * seq.t_seq)
    if abs(f_pair - lockin.sample_rate) > 1e-6 * lockin.sample_rate:
        raise ValueError(
            f"pair rate {f_pair} Hz does not match lock-in expectation "
            f"{lockin.sample_rate} Hz (= samples_per_cycle * demod2_freq)"
        )
    trace = simulate_run(sensor, seq, signal, duration, seed)
    s1 = demod_stage1(trace)
    s2 = demod_stage2(s1, lockin)
    return RunResult(trace=trace, fluorescence=s1, demod=s2)
