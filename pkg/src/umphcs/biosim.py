"""Physically grounded signal synthesis for the emulated patient.

Transfer functions follow the named parts' published characteristics:
an LM35 at 10 mV/degC, an MPX5050-class gauge sensor with
V = Vs * (0.018 * P_kPa + 0.04), and a 2 mV/V full-scale bridge load cell
behind an instrumentation amplifier. The cuff deflation run is a linear
ramp with a Gaussian oscillation envelope riding on it, which gives
closed-form systolic/diastolic ground truth for the 50%/70% ratio method:

    SP_true = map + sigma * sqrt(2 ln 2)
    DP_true = map - sigma * sqrt(2 ln(1/0.7))

All noise is keyed on (seed, sample time), so every synthetic signal is
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics.scalars import PotCalib

DEFLATION_FLOOR_MMHG = 20.0


class OutOfSensorRange(ValueError):
    pass


class OutOfTravel(ValueError):
    pass


@dataclass(frozen=True)
class SensorConstants:
    lm35_slope: float = 0.010            # V per degC
    lm35_max_c: float = 150.0
    mpx_span_kpa: float = 50.0
    mpx_supply_v: float = 5.0
    loadcell_fullscale: float = 0.002    # V per V excitation, at capacity
    loadcell_capacity_kg: float = 150.0
    inamp_gain: float = 400.0
    excitation_v: float = 5.0
    kpa_per_mmhg: float = 1.0 / 7.50062

    @property
    def mpx_span_mmhg(self) -> float:
        return self.mpx_span_kpa / self.kpa_per_mmhg


DEFAULT_CONSTANTS = SensorConstants()


def lm35_voltage(temp_c: float, k: SensorConstants = DEFAULT_CONSTANTS) -> float:
    if not 0.0 <= temp_c <= k.lm35_max_c:
        raise OutOfSensorRange(f"LM35 measures 0..{k.lm35_max_c} degC, got {temp_c}")
    return k.lm35_slope * temp_c


def mpx_voltage(p_mmhg: float, k: SensorConstants = DEFAULT_CONSTANTS) -> float:
    if not 0.0 <= p_mmhg <= k.mpx_span_mmhg:
        raise OutOfSensorRange(f"pressure {p_mmhg} mmHg beyond {k.mpx_span_kpa} kPa gauge span")
    return k.mpx_supply_v * (0.018 * (p_mmhg * k.kpa_per_mmhg) + 0.04)


def loadcell_voltage(weight_kg: float, k: SensorConstants = DEFAULT_CONSTANTS) -> float:
    """Bridge output amplified by the instrumentation stage."""
    if not 0.0 <= weight_kg <= k.loadcell_capacity_kg:
        raise OutOfSensorRange(f"load {weight_kg} kg beyond {k.loadcell_capacity_kg} kg capacity")
    bridge = (weight_kg / k.loadcell_capacity_kg) * k.loadcell_fullscale * k.excitation_v
    return bridge * k.inamp_gain


def slidepot_voltage(d: float, pot: PotCalib, supply_v: float = 5.0) -> float:
    if not pot.d_min <= d <= pot.d_max:
        raise OutOfTravel(f"{d} m outside pot travel [{pot.d_min}, {pot.d_max}]")
    return supply_v * (d - pot.d_min) / (pot.d_max - pot.d_min)


_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _unit(x: int) -> float:
    return ((x >> 11) + 0.5) / (1 << 53)


def seeded_gauss(seed: int, key: int, sd: float) -> float:
    """Counter-style Gaussian draw: same (seed, key) always gives the same
    value, independent of call order."""
    if sd == 0.0:
        return 0.0
    base = _splitmix64(seed * 0x632BE59BD9B4E019 + key)
    u1 = _unit(_splitmix64(base))
    u2 = _unit(_splitmix64(base + 1))
    return sd * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class CuffRunParams:
    """One synthetic deflation run. Pressure ramps down linearly from
    p_start while a Gaussian-envelope cardiac oscillation rides on top."""

    map_true: float
    amp_max: float
    sigma: float
    heart_rate_hz: float
    p_start: float = 180.0
    deflation_rate: float = 3.0
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.p_start > self.map_true > 0:
            raise ValueError("need p_start > map_true > 0")
        if self.deflation_rate <= 0:
            raise ValueError("deflation_rate must be positive")
        if self.amp_max < 0:
            raise ValueError("amp_max must be nonnegative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.5 <= self.heart_rate_hz <= 5.0:
            raise ValueError("heart_rate_hz must be in [0.5, 5.0]")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    @property
    def duration_s(self) -> float:
        return (self.p_start - DEFLATION_FLOOR_MMHG) / self.deflation_rate

    def envelope(self, p_mmhg: float) -> float:
        return self.amp_max * math.exp(-((p_mmhg - self.map_true) ** 2) / (2.0 * self.sigma**2))

    @property
    def sp_true(self) -> float:
        """Cuff pressure where the envelope passes 50% on the high side."""
        return self.map_true + self.sigma * math.sqrt(2.0 * math.log(2.0))

    @property
    def dp_true(self) -> float:
        """Cuff pressure where the envelope passes 70% on the low side."""
        return self.map_true - self.sigma * math.sqrt(2.0 * math.log(1.0 / 0.7))


def cuff_signal(params: CuffRunParams, t: float) -> float:
    """Cuff pressure in mmHg at run time t seconds."""
    if not 0.0 <= t <= params.duration_s + 1e-9:
        raise ValueError(f"t={t} outside run duration [0, {params.duration_s}]")
    p = params.p_start - params.deflation_rate * t
    osc = params.envelope(p) * math.sin(2.0 * math.pi * params.heart_rate_hz * t)
    noise = seeded_gauss(params.seed, int(round(t * 1e6)), params.noise_sd)
    return p + osc + noise


def cuff_series(params: CuffRunParams, sample_rate: float = 100.0) -> list[tuple[float, float]]:
    """Sample the whole run at a fixed rate, down to the deflation floor.

    Matches cuff_signal sample for sample (same noise key per time stamp).
    """
    n = int(math.floor(params.duration_s * sample_rate)) + 1
    t = np.arange(n) / sample_rate
    p = params.p_start - params.deflation_rate * t
    osc = params.amp_max * np.exp(-((p - params.map_true) ** 2) / (2.0 * params.sigma**2))
    s = p + osc * np.sin(2.0 * np.pi * params.heart_rate_hz * t)
    if params.noise_sd > 0:
        s = s + np.array([seeded_gauss(params.seed, int(round(ti * 1e6)), params.noise_sd)
                          for ti in t])
    return list(zip(t.tolist(), s.tolist()))


@dataclass(frozen=True)
class HearingProfile:
    """Per-frequency hearing thresholds in dB HL. A frequency that is not
    in the map is never heard at any presentable level."""

    threshold_db: dict[float, float] = field(default_factory=dict)

    def __post_init__(self):
        for freq, db in self.threshold_db.items():
            if not -10.0 <= db <= 120.0:
                raise ValueError(f"threshold {db} dB HL at {freq} Hz outside [-10, 120]")


def hearing_response(profile: HearingProfile, freq: float, level_db: float) -> bool:
    """Does this patient hear a tone at (freq, level)? Threshold inclusive."""
    threshold = profile.threshold_db.get(freq)
    return threshold is not None and level_db >= threshold


class TemperatureModule:
    """LM35 thermometer stick held at a fixed body temperature."""

    has_filtered = False

    def __init__(self, temp_c: float, k: SensorConstants = DEFAULT_CONSTANTS):
        self.temp_c = temp_c
        self.k = k

    def voltage(self, channel: str, clock_ms: float) -> float:
        if channel != "raw":
            raise ValueError("temperature module has a single channel")
        return lm35_voltage(self.temp_c, self.k)


class WeightModule:
    """Load-cell platform with a person of fixed weight standing on it."""

    has_filtered = False

    def __init__(self, weight_kg: float, k: SensorConstants = DEFAULT_CONSTANTS):
        self.weight_kg = weight_kg
        self.k = k

    def voltage(self, channel: str, clock_ms: float) -> float:
        if channel != "raw":
            raise ValueError("weight module has a single channel")
        return loadcell_voltage(self.weight_kg, self.k)


class PotModule:
    """Slide pot at a fixed lens position."""

    has_filtered = False

    def __init__(self, d: float, pot: PotCalib | None = None):
        self.d = d
        self.pot = pot or PotCalib()

    def voltage(self, channel: str, clock_ms: float) -> float:
        if channel != "raw":
            raise ValueError("pot module has a single channel")
        return slidepot_voltage(self.d, self.pot)


class CuffModule:
    """Arm cuff on the MPX gauge. The raw channel carries the deflation
    signal; the filtered channel models the analog band-pass option that
    exposes the oscillation waveform directly (fixed 0.05 V/mmHg around a
    2.5 V midpoint)."""

    has_filtered = True
    FILTER_GAIN_V_PER_MMHG = 0.05
    FILTER_MID_V = 2.5

    def __init__(self, params: CuffRunParams, k: SensorConstants = DEFAULT_CONSTANTS):
        self.params = params
        self.k = k

    def _t(self, clock_ms: float) -> float:
        return min(max(clock_ms / 1000.0, 0.0), self.params.duration_s)

    def voltage(self, channel: str, clock_ms: float) -> float:
        t = self._t(clock_ms)
        if channel == "raw":
            return mpx_voltage(cuff_signal(self.params, t), self.k)
        p = self.params.p_start - self.params.deflation_rate * t
        osc = cuff_signal(self.params, t) - p
        return self.FILTER_MID_V + self.FILTER_GAIN_V_PER_MMHG * osc
