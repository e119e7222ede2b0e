"""Single-code conversions: ADC code to temperature, pressure, weight,
pot distance, plus the ruler-ratio height calculation.

All transfers assume the 10-bit / 5 V ADC model; inverses of the biosim
sensor curves recover the physical input within one LSB of each span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ADC_SPAN = 1024
VREF = 5.0
LM35_SLOPE = 0.010            # V per degC
MMHG_PER_KPA = 7.50062
MPX_OFFSET_V = 0.2            # gauge output at 0 kPa
MPX_SLOPE = 0.018             # per kPa, times supply
BODY_TEMP_RANGE_C = (30.0, 45.0)


class CodeRangeError(ValueError):
    pass


def _check_code(code: int) -> None:
    if not 0 <= code <= ADC_SPAN - 1:
        raise CodeRangeError(f"ADC code {code} outside [0, {ADC_SPAN - 1}]")


def code_to_volts(code: int) -> float:
    _check_code(code)
    return code * VREF / ADC_SPAN


@dataclass(frozen=True)
class TemperatureCalib:
    """Additive correction against a reference thermometer."""

    offset_c: float = 0.0

    def __post_init__(self):
        if abs(self.offset_c) > 5.0:
            raise ValueError("temperature offset beyond +/-5 degC is a wiring problem")


def temperature_from_code(code: int, calib: TemperatureCalib = TemperatureCalib()) -> float:
    return code_to_volts(code) / LM35_SLOPE + calib.offset_c


def temperature_implausible(t_c: float) -> bool:
    """Advisory flag: outside the body-temperature window, not a failure."""
    lo, hi = BODY_TEMP_RANGE_C
    return not lo <= t_c <= hi


MPX_FULL_SCALE_MMHG = MMHG_PER_KPA * 50.0  # gauge output saturates at 4.7 V


def pressure_from_code(code: int) -> float:
    """Invert the gauge transfer. Readings below the 0.2 V offset clamp to
    0; codes above the sensor's 4.7 V full-scale output clamp to the span
    (the gauge saturates, the electronics do not)."""
    v = code_to_volts(code)
    p = MMHG_PER_KPA * (v / VREF - 0.04) / MPX_SLOPE
    return min(max(p, 0.0), MPX_FULL_SCALE_MMHG)


def pressure_underflow(code: int) -> bool:
    """Below the sensor's zero-pressure offset: cuff likely disconnected."""
    return code_to_volts(code) < MPX_OFFSET_V


@dataclass(frozen=True)
class TwoPointCalib:
    """Line through two (code, value) anchor points."""

    code_lo: int
    value_lo: float
    code_hi: int
    value_hi: float

    def __post_init__(self):
        if self.code_lo == self.code_hi:
            raise ValueError("calibration anchors must have distinct codes")


def weight_from_code(code: int, calib: TwoPointCalib) -> float:
    _check_code(code)
    slope = (calib.value_hi - calib.value_lo) / (calib.code_hi - calib.code_lo)
    return calib.value_lo + (code - calib.code_lo) * slope


def weight_negative(weight_kg: float) -> bool:
    """Advisory flag for sensor drift below the zero anchor."""
    return weight_kg < 0.0


@dataclass(frozen=True)
class PotCalib:
    """Slide-pot travel limits; the proportionality constant between pot
    voltage and lens distance, generalized to an affine map."""

    d_min: float = 0.015
    d_max: float = 0.075

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")


def pot_to_distance(code: int, pot: PotCalib = PotCalib()) -> float:
    _check_code(code)
    return pot.d_min + (code / (ADC_SPAN - 1)) * (pot.d_max - pot.d_min)


class DegenerateRuler(ValueError):
    pass


@dataclass(frozen=True)
class HeightInput:
    """Operator-marked pixel coordinates plus the ruler's physical length."""

    ruler_top: tuple[float, float]
    ruler_bottom: tuple[float, float]
    head: tuple[float, float]
    foot: tuple[float, float]
    ruler_len: float

    def __post_init__(self):
        if self.ruler_top == self.ruler_bottom:
            raise ValueError("ruler endpoints coincide")
        if self.head == self.foot:
            raise ValueError("head and foot coincide")
        if self.ruler_len <= 0:
            raise ValueError("ruler length must be positive")


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def height_from_pixels(inp: HeightInput) -> float:
    """body pixels / ruler pixels, scaled by the ruler's real length."""
    n_r = _dist(inp.ruler_top, inp.ruler_bottom)
    if n_r < 10.0:
        raise DegenerateRuler(f"ruler spans only {n_r:.1f} px; mark a longer reference")
    n_b = _dist(inp.head, inp.foot)
    return n_b / n_r * inp.ruler_len
