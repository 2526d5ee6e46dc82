"""Audio transport through the magnetometer: carrier encoding, bandwidth
compression, and waveform reconstruction from the demodulated phase.

Melody path: each tone f is mixed onto a carrier (9.5 kHz default), placing
sidebands at carrier +/- f; with a 10 kHz readout reference the upper
sidebands land at readout frequencies f_r = carrier + f - 10 kHz while the
lower sidebands fall outside the demodulator passband.  Reconstruction
mixes the phase readout with a low-frequency carrier (500 Hz default) and
notches the unwanted sidebands at carrier - f_r.

Speech path: the clip is stretched in time by an integer factor at a fixed
sample rate (band-limited interpolation), compressing its spectrum by the
factor; the compressed clip is mixed onto a 10 kHz carrier and transported
as a tone list.  Reconstruction block-averages every `factor` readout
samples while keeping the sample-rate label, expanding the spectrum back.
"""

from __future__ import annotations

import math
import wave
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, resample

from .lockin import DemodOutput, LockInConfig
from .signals import CompositeSignal, SignalComponent, TimeSeries, _readonly, fft_magnitude


@dataclass(frozen=True)
class AudioClip:
    """Mono audio samples, nominally within [-1, 1]."""

    sample_rate: float
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be > 0")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", _readonly(s))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate

    def normalized(self, peak: float = 0.9) -> "AudioClip":
        top = np.max(np.abs(self.samples))
        if top == 0:
            return self
        return AudioClip(self.sample_rate, self.samples * (peak / top), dict(self.meta))

    def to_wav(self, path) -> None:
        """16-bit PCM mono RIFF; samples are clipped to [-1, 1]."""
        pcm = np.clip(self.samples, -1.0, 1.0)
        data = (pcm * 32767.0).astype("<i2").tobytes()
        with wave.open(str(path), "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(int(round(self.sample_rate)))
            fh.writeframes(data)

    @classmethod
    def from_wav(cls, path) -> "AudioClip":
        with wave.open(str(path), "rb") as fh:
            if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
                raise ValueError("expected 16-bit mono PCM")
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
        samples = np.frombuffer(raw, dtype="<i2").astype(float) / 32767.0
        return cls(float(rate), samples)


@dataclass(frozen=True)
class EncodingConfig:
    """Parameters tying an encoded signal to its reconstruction."""

    carrier: float
    compression_factor: int = 1
    reconstruction_carrier: float = 500.0
    notch_freqs: tuple = ()
    notch_q: float = 30.0
    expected_readout_freqs: tuple = ()
    field_scale: float = 1e-9  # tesla per unit clip amplitude

    def __post_init__(self):
        if self.compression_factor < 1 or int(self.compression_factor) != self.compression_factor:
            raise ValueError("compression_factor must be an integer >= 1")


def occupied_bandwidth(clip: AudioClip, rel_threshold: float = 1e-4) -> float:
    """Highest frequency with spectral amplitude above rel_threshold of peak."""
    spec = np.abs(np.fft.rfft(clip.samples))
    top = np.max(spec)
    if top == 0:
        return 0.0
    above = np.nonzero(spec > rel_threshold * top)[0]
    return float(above[-1] * clip.sample_rate / len(clip.samples))


def compress_bandwidth(clip: AudioClip, factor: int) -> AudioClip:
    """Stretch the clip to factor x its length at the same sample rate via
    band-limited (FFT) interpolation, compressing the spectrum by factor."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be an integer >= 1")
    if factor == 1:
        return clip
    out = resample(clip.samples, int(factor) * len(clip.samples))
    return AudioClip(clip.sample_rate, out, {"compressed_by": int(factor)})


def block_average(clip: AudioClip, factor: int) -> AudioClip:
    """Average every `factor` samples, keeping the sample-rate label, which
    compresses time and expands the spectrum by factor.  A trailing
    remainder shorter than one block is truncated and noted in meta."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be an integer >= 1")
    if factor == 1:
        return clip
    factor = int(factor)
    n_blocks = len(clip) // factor
    remainder = len(clip) - n_blocks * factor
    meta = {"expanded_by": factor}
    if remainder:
        meta["truncated_samples"] = remainder
    out = clip.samples[: n_blocks * factor].reshape(n_blocks, factor).mean(axis=1)
    return AudioClip(clip.sample_rate, out, meta)


def mix_carrier(clip: AudioClip, carrier: float) -> AudioClip:
    """Multiply by cos(2 pi carrier t): double-sideband spectrum symmetric
    about the carrier.  Rejects carrier + occupied bandwidth at or beyond
    Nyquist."""
    if carrier <= 0:
        raise ValueError("carrier must be > 0")
    bw = occupied_bandwidth(clip)
    if carrier + bw >= clip.sample_rate / 2:
        raise ValueError(
            f"carrier {carrier} Hz + bandwidth {bw:.1f} Hz reaches Nyquist "
            f"({clip.sample_rate / 2} Hz)"
        )
    mixed = clip.samples * np.cos(2 * np.pi * carrier * clip.times)
    return AudioClip(clip.sample_rate, mixed, {"carrier_hz": carrier})


def notch_filter(clip: AudioClip, freq: float, q: float = 30.0) -> AudioClip:
    """Second-order notch (biquad): unity gain at DC and Nyquist, deep
    rejection at `freq`."""
    nyq = clip.sample_rate / 2
    if not 0 < freq < nyq:
        raise ValueError(f"notch frequency must be in (0, {nyq}) Hz")
    w0 = 2 * math.pi * freq / clip.sample_rate
    alpha = math.sin(w0) / (2 * q)
    b = np.array([1.0, -2 * math.cos(w0), 1.0])
    a = np.array([1 + alpha, -2 * math.cos(w0), 1 - alpha])
    out = lfilter(b / a[0], a / a[0], clip.samples)
    return AudioClip(clip.sample_rate, out, dict(clip.meta))


def clip_to_signal(clip: AudioClip, field_scale: float,
                   rel_threshold: float = 1e-9) -> CompositeSignal:
    """Exact tone decomposition of the clip's periodic extension.

    Each retained FFT bin becomes one field tone of amplitude
    field_scale * bin amplitude (tesla).  With the default threshold the
    tone list reproduces the clip exactly over its duration.
    """
    n = len(clip)
    if n < 2:
        raise ValueError("clip too short")
    spec = np.fft.rfft(clip.samples)
    scale = np.full(len(spec), 2.0 / n)
    scale[0] = 1.0 / n
    if n % 2 == 0:
        scale[-1] = 1.0 / n
    amps = np.abs(spec) * scale
    keep = np.nonzero(amps > rel_threshold * np.max(amps))[0]
    comps = []
    for k in keep:
        freq = k * clip.sample_rate / n
        comps.append(
            SignalComponent(
                amplitude=field_scale * amps[k],
                frequency=freq,
                phase=float(np.angle(spec[k])),
            )
        )
    return CompositeSignal(components=tuple(comps))


def encode_melody(
    notes,
    *,
    carrier: float = 9500.0,
    reference_freq: float = 10e3,
    note_duration: float = 0.8,
    field_scale: float = 1e-9,
    reconstruction_carrier: float = 500.0,
    notch_q: float = 30.0,
) -> tuple:
    """Schedule of carrier-mixed tones, one note at a time.

    notes: iterable of tone frequencies in Hz, or (frequency, amplitude)
    pairs with amplitude relative to field_scale.  Each note contributes
    sidebands at carrier +/- f; the readout tone for the upper sideband is
    f_r = carrier + f - reference_freq.  Returns (CompositeSignal,
    EncodingConfig) with the notch list set to reconstruction_carrier - f_r
    (the unwanted lower sidebands after remixing).
    """
    norm = []
    for item in notes:
        if np.isscalar(item):
            norm.append((float(item), 1.0))
        else:
            norm.append((float(item[0]), float(item[1])))
    schedule = []
    readout_freqs = []
    for i, (f, amp) in enumerate(norm):
        t0 = i * note_duration
        b = field_scale * amp / 2
        comps = (
            SignalComponent(b, carrier + f, 0.0),
            SignalComponent(b, carrier - f, 0.0),
        )
        schedule.append((t0, t0 + note_duration, comps))
        readout_freqs.append(carrier + f - reference_freq)
    config = EncodingConfig(
        carrier=carrier,
        reconstruction_carrier=reconstruction_carrier,
        notch_freqs=tuple(reconstruction_carrier - fr for fr in readout_freqs),
        notch_q=notch_q,
        expected_readout_freqs=tuple(readout_freqs),
        field_scale=field_scale,
    )
    return CompositeSignal(schedule=tuple(schedule)), config


def encode_speech(
    clip: AudioClip,
    factor: int = 20,
    *,
    carrier: float = 10e3,
    field_scale: float = 1e-9,
) -> tuple:
    """Compress the clip's bandwidth by `factor`, mix onto the carrier, and
    decompose into an exact field tone list.

    Returns (CompositeSignal, EncodingConfig, broadcast_clip); the signal
    repeats with the broadcast clip's (stretched) duration.
    """
    compressed = compress_bandwidth(clip, factor)
    broadcast = mix_carrier(compressed, carrier)
    signal = clip_to_signal(broadcast, field_scale)
    config = EncodingConfig(
        carrier=carrier,
        compression_factor=int(factor),
        field_scale=field_scale,
    )
    return signal, config, broadcast


def _settled_phase_series(demod: DemodOutput, lockin: LockInConfig | None) -> TimeSeries:
    skip = 0
    if lockin is not None:
        skip = int(math.ceil(2 * lockin.settle_time * demod.sample_rate))
        if skip >= len(demod):
            raise ValueError("demod output shorter than the filter settling time")
    phase = demod.phase[skip:]
    return TimeSeries(
        demod.sample_rate,
        demod.start_time + skip / demod.sample_rate,
        phase - np.mean(phase),
    )


def reconstruct_melody(
    readout: DemodOutput,
    config: EncodingConfig,
    lockin: LockInConfig | None = None,
) -> AudioClip:
    """Remix the phase readout with the reconstruction carrier and notch the
    unwanted sidebands; tones at f_r come back at
    reconstruction_carrier + f_r.

    Expected readout tones that are missing from the spectrum produce a
    warning and are noted in the clip meta; reconstruction proceeds.
    """
    series = _settled_phase_series(readout, lockin)
    missing = []
    if config.expected_readout_freqs:
        spec = fft_magnitude(series, window="hann")
        df = spec.frequency_hz[1] - spec.frequency_hz[0]
        floor = float(np.median(spec.amplitude))

        def level(fr):
            k = int(round(fr / df))
            window = spec.amplitude[max(0, k - 2): k + 3]
            return float(np.max(window)) if len(window) else 0.0

        levels = {fr: level(fr) for fr in config.expected_readout_freqs}
        # a tone counts as missing when far below its siblings or the floor
        strongest = max(levels.values(), default=0.0)
        threshold = max(10 * floor, 0.01 * strongest, 1e-12)
        missing = [fr for fr, lv in levels.items() if lv < threshold]
        if missing:
            warnings.warn(
                f"expected readout tones missing: {missing} Hz; "
                "reconstruction will lack those notes",
                stacklevel=2,
            )
    t = series.times
    remixed = series.values * np.cos(2 * np.pi * config.reconstruction_carrier * t)
    clip = AudioClip(series.sample_rate, remixed)
    for f_notch in config.notch_freqs:
        clip = notch_filter(clip, f_notch, config.notch_q)
    out = clip.normalized()
    meta = dict(out.meta)
    meta["carrier_hz"] = config.reconstruction_carrier
    if missing:
        meta["missing_readout_freqs"] = tuple(missing)
    return AudioClip(out.sample_rate, out.samples, meta)


def reconstruct_speech(
    readout: DemodOutput,
    factor: int,
    *,
    broadcast_rate: float = 1e5,
    lockin: LockInConfig | None = None,
    normalize: bool = True,
) -> AudioClip:
    """Undo the factor-x time stretch: resample the phase readout to the
    broadcast rate, then average every `factor` points keeping the rate
    label, expanding the spectrum by factor."""
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be an integer >= 1")
    series = _settled_phase_series(readout, lockin)
    n_out = int(round(len(series) * broadcast_rate / series.sample_rate))
    upsampled = AudioClip(broadcast_rate, resample(series.values, n_out))
    out = block_average(upsampled, int(factor))
    return out.normalized() if normalize else out


def spectral_correlation(a: AudioClip, b: AudioClip, f_max: float | None = None,
                         n_grid: int = 2048) -> float:
    """Cosine similarity of magnitude spectra on a shared frequency grid."""
    if f_max is None:
        f_max = min(a.sample_rate, b.sample_rate) / 2

    def mag(clip):
        spec = np.abs(np.fft.rfft(clip.samples))
        freqs = np.fft.rfftfreq(len(clip.samples), 1 / clip.sample_rate)
        grid = np.linspace(0.0, f_max, n_grid)
        return np.interp(grid, freqs, spec)

    sa, sb = mag(a), mag(b)
    denom = np.linalg.norm(sa) * np.linalg.norm(sb)
    if denom == 0:
        return 0.0
    return float(np.dot(sa, sb) / denom)


def cross_correlation_peak(x: np.ndarray, y: np.ndarray) -> float:
    """Maximum normalized cross-correlation magnitude over all lags."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x = x - np.mean(x)
    y = y - np.mean(y)
    denom = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if denom == 0:
        return 0.0
    corr = np.correlate(x, y, mode="full")
    return float(np.max(np.abs(corr)) / denom)
