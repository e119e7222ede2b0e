"""Diagnostics: ADC codes and sample streams to medical results."""

from .bp import (
    BpPipelineError,
    BpResult,
    EnvelopePoint,
    NoBeats,
    NoDiastolicCrossing,
    NonuniformSampling,
    NoSystolicCrossing,
    OscillationEnvelope,
    TooShort,
    envelope_peak,
    estimate_bp,
    extract_ow,
    ow_envelope,
)
from .eye import DegenerateLensSystem, EyePowerTrace, LensBench, eye_power, eye_power_trace
from .hearing import (
    HEARD,
    LEVEL_MAX_DB,
    LEVEL_MIN_DB,
    LEVEL_STEP_DB,
    NOT_HEARD,
    SWEEP_FREQUENCIES_HZ,
    TIMEOUT,
    HearingState,
    NotFinished,
    StepAfterFinish,
    audiogram,
    hearing_step,
    run_sweep,
)
from .scalars import (
    DegenerateRuler,
    HeightInput,
    PotCalib,
    TemperatureCalib,
    TwoPointCalib,
    height_from_pixels,
    pot_to_distance,
    pressure_from_code,
    pressure_underflow,
    temperature_from_code,
    temperature_implausible,
    weight_from_code,
    weight_negative,
)

__all__ = [name for name in dir() if not name.startswith("_")]
