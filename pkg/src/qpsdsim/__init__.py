"""Phase-modulated quantum magnetometry simulator.

End-to-end simulation of AC magnetic sensing with a two-drive,
phase-modulated spin readout: pulse-sequence filter functions, shot-noise
photon counting, two-stage lock-in demodulation, heterodyne spectrum
analysis with sign disambiguation, and audio encode / reconstruct
pipelines.
"""

__version__ = "0.1.0"

from .signals import (  # noqa: F401
    AMBIGUOUS,
    CONFIRMED,
    REJECTED_NOISE,
    CompositeSignal,
    SignalComponent,
    Spectrum,
    TimeSeries,
    evaluate,
    fft_magnitude,
    synthesize_tones,
    wrap_phase,
)
from .physics import (  # noqa: F401
    GAMMA_E,
    DriveConfig,
    FilterValue,
    PulseSequence,
    accumulated_phase,
    filter_closed_form,
    filter_curve,
    filter_numeric_oracle,
    heterodyne_frequency,
    ramsey_two_drive_expectation,
    reference_shift,
    switching_function,
)
from .sensor import (  # noqa: F401
    ReadoutTrace,
    SensorConfig,
    direct_readout_run,
    simulate_run,
)
from .lockin import (  # noqa: F401
    DemodOutput,
    LockInConfig,
    cycle_phase_fit,
    demod_stage1,
    demod_stage2,
    ldr_db,
    lowpass_response,
    lsq_phase_fit,
    phase_noise,
    sensitivity,
    sensitivity_fluorescence,
    steady_phase,
)
from .pipeline import RunResult, qpsd_run  # noqa: F401
from .analyzer import (  # noqa: F401
    AnalyzerPlan,
    Section,
    SectionResult,
    analyze_run,
    disambiguate,
    measure_section,
    merge,
    plan_sections,
)
from .audio import (  # noqa: F401
    AudioClip,
    EncodingConfig,
    block_average,
    compress_bandwidth,
    encode_melody,
    encode_speech,
    mix_carrier,
    notch_filter,
    reconstruct_melody,
    reconstruct_speech,
)
