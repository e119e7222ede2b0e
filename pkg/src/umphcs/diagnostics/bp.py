"""Oscillometric pipeline: cuff-pressure stream to SP/DP/MAP/HR.

Stages: zero-phase band-pass (0.5-5 Hz, second order, forward-backward)
isolates the oscillation waveform; beat detection turns it into an
amplitude envelope against the deflation trend; the ratio method reads
systolic at the 50% crossing on the high-pressure side of the envelope
maximum and diastolic at the 70% crossing on the low side. MAP is the
pressure at maximum oscillation, heart rate the median inter-beat interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import butter, filtfilt, find_peaks

BAND_HZ = (0.5, 5.0)
FILTER_ORDER = 2
SP_RATIO = 0.5
DP_RATIO = 0.7
MIN_DURATION_S = 10.0
MIN_BEATS = 5


class BpPipelineError(ValueError):
    pass


class TooShort(BpPipelineError):
    pass


class NonuniformSampling(BpPipelineError):
    pass


class NoBeats(BpPipelineError):
    pass


class NoSystolicCrossing(BpPipelineError):
    pass


class NoDiastolicCrossing(BpPipelineError):
    pass


@dataclass(frozen=True)
class EnvelopePoint:
    cuff_mmhg: float
    amplitude_mmhg: float
    beat_time_s: float


@dataclass(frozen=True)
class OscillationEnvelope:
    points: tuple[EnvelopePoint, ...]  # time-ascending, cuff pressure strictly decreasing

    def __post_init__(self):
        if any(p.amplitude_mmhg < 0 for p in self.points):
            raise ValueError("envelope amplitudes must be nonnegative")
        pressures = [p.cuff_mmhg for p in self.points]
        if any(b >= a for a, b in zip(pressures, pressures[1:])):
            raise ValueError("cuff pressure must strictly decrease along the run")


@dataclass(frozen=True)
class BpResult:
    systolic: float
    diastolic: float
    map: float
    heart_rate: float  # bpm

    def __post_init__(self):
        if not self.diastolic < self.map < self.systolic:
            raise ValueError("expected diastolic < map < systolic")
        if not 30.0 <= self.heart_rate <= 300.0:
            raise ValueError("heart rate outside 30..300 bpm")


def _split(series: Sequence[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be (t, value) pairs")
    return arr[:, 0], arr[:, 1]


def extract_ow(pressure_series: Sequence[tuple[float, float]],
               sample_rate: float = 100.0) -> list[tuple[float, float]]:
    """Band-pass the raw cuff signal into the oscillation waveform.

    Applied forward and backward for zero phase; the residual DC offset is
    removed so the output mean is zero relative to the input span.
    """
    t, p = _split(pressure_series)
    if len(t) < 2 or t[-1] - t[0] < MIN_DURATION_S:
        raise TooShort(f"need at least {MIN_DURATION_S} s of data")
    dt = np.diff(t)
    nominal = 1.0 / sample_rate
    if np.any(dt > 3.0 * nominal) or np.any(dt <= 0):
        raise NonuniformSampling("gap beyond 3 sample intervals in the stream")
    # Remove the deflation ramp first so the filter's edge transients scale
    # with the oscillation, not with the full cuff pressure span.
    line = np.polyval(np.polyfit(t, p, 1), t)
    b, a = butter(FILTER_ORDER, BAND_HZ, btype="bandpass", fs=sample_rate)
    ow = filtfilt(b, a, p - line)
    ow = ow - float(np.mean(ow))
    return list(zip(t.tolist(), ow.tolist()))


def _dominant_beat_hz(ow: np.ndarray, fs: float) -> float:
    spectrum = np.abs(np.fft.rfft(ow * np.hanning(len(ow))))
    freqs = np.fft.rfftfreq(len(ow), d=1.0 / fs)
    mask = (freqs >= 0.5) & (freqs <= 5.0)
    if not mask.any() or not spectrum[mask].any():
        raise NoBeats("no oscillation energy in the cardiac band")
    return float(freqs[mask][np.argmax(spectrum[mask])])


FLAT_OW_MMHG = 0.05  # below one eighth ADC step: no real oscillation present


def ow_envelope(ow_series: Sequence[tuple[float, float]],
                pressure_series: Sequence[tuple[float, float]]) -> OscillationEnvelope:
    """Beat-by-beat amplitude envelope against the deflation trend.

    A beat is a local oscillation maximum paired with the adjacent trough;
    its envelope point records the smoothed deflation-trend cuff pressure
    at the peak time.
    """
    t, ow = _split(ow_series)
    tp, p = _split(pressure_series)
    if len(t) != len(tp) or not np.allclose(t, tp):
        raise ValueError("oscillation and pressure series must share a time base")
    fs = 1.0 / float(np.median(np.diff(t)))

    if float(np.max(np.abs(ow), initial=0.0)) < FLAT_OW_MMHG:
        raise NoBeats("flat oscillation waveform")
    f0 = _dominant_beat_hz(ow, fs)
    min_dist = max(1, int(round(0.6 * fs / f0)))
    peaks, _ = find_peaks(ow, distance=min_dist, height=0.0)
    if len(peaks) < MIN_BEATS:
        raise NoBeats(f"only {len(peaks)} beats detected")

    # Oscillation removed, then a ~1.5 beat average kills out-of-band noise
    # while leaving the deflation ramp intact.
    trend = uniform_filter1d(p - ow, size=max(1, int(round(1.5 * fs / f0))),
                             mode="nearest")

    period = int(round(fs / f0))
    points = []
    for k, i in enumerate(peaks):
        j_end = peaks[k + 1] if k + 1 < len(peaks) else min(i + period, len(ow) - 1)
        j_start = peaks[k - 1] if k > 0 else max(i - period, 0)
        troughs = []
        if j_end > i:
            troughs.append(float(np.min(ow[i:j_end + 1])))
        if j_start < i:
            troughs.append(float(np.min(ow[j_start:i + 1])))
        if not troughs:
            continue
        # Averaging the troughs on both sides keeps the amplitude centered
        # on the beat instead of lagging half a beat down the deflation.
        amplitude = float(ow[i]) - sum(troughs) / len(troughs)
        if amplitude <= 0:
            continue
        cuff = float(trend[i])
        if points and cuff >= points[-1].cuff_mmhg:
            continue  # trend wobble against deflation; skip the beat
        points.append(EnvelopePoint(cuff_mmhg=cuff,
                                    amplitude_mmhg=amplitude,
                                    beat_time_s=float(t[i])))
    if len(points) < MIN_BEATS:
        raise NoBeats(f"only {len(points)} usable beats")
    return OscillationEnvelope(points=tuple(points))


def envelope_peak(env: OscillationEnvelope) -> tuple[float, float]:
    """(cuff pressure, amplitude) at the envelope maximum, refined below
    beat spacing with a parabola through the top three points. A symmetric
    envelope refines to its middle point exactly."""
    pts = env.points
    amps = [pt.amplitude_mmhg for pt in pts]
    i = int(np.argmax(amps))
    if not 0 < i < len(pts) - 1:
        return pts[i].cuff_mmhg, amps[i]
    x1, x2, x3 = (pts[j].cuff_mmhg for j in (i - 1, i, i + 1))
    y1, y2, y3 = amps[i - 1], amps[i], amps[i + 1]
    # Three-point vertex in a form where a symmetric triple cancels to
    # exactly x2 (polyfit would leave float residue there).
    num = (x2 - x1) ** 2 * (y2 - y3) - (x2 - x3) ** 2 * (y2 - y1)
    den = (x2 - x1) * (y2 - y3) - (x2 - x3) * (y2 - y1)
    if den == 0.0:
        return x2, y2
    vertex = x2 - 0.5 * num / den
    vertex = min(max(vertex, min(x1, x3)), max(x1, x3))
    return float(vertex), y2


def _interp_crossing(p_in: float, a_in: float, p_out: float, a_out: float,
                     threshold: float) -> float:
    # a_in >= threshold > a_out; linear in (amplitude, pressure)
    if a_in == a_out:
        return p_out
    frac = (a_in - threshold) / (a_in - a_out)
    return p_in + frac * (p_out - p_in)


def estimate_bp(env: OscillationEnvelope) -> BpResult:
    """Ratio-method read-out: 50% crossing above MAP is systolic, 70%
    crossing below MAP is diastolic."""
    pts = env.points
    if len(pts) < MIN_BEATS:
        raise BpPipelineError("envelope too sparse")
    amps = [pt.amplitude_mmhg for pt in pts]
    i_max = int(np.argmax(amps))
    map_mmhg, a_max = envelope_peak(env)

    systolic = None
    sp_threshold = SP_RATIO * a_max
    for k in range(i_max, 0, -1):  # walk toward higher pressures (earlier beats)
        inner, outer = pts[k], pts[k - 1]
        if outer.amplitude_mmhg < sp_threshold <= inner.amplitude_mmhg:
            systolic = _interp_crossing(inner.cuff_mmhg, inner.amplitude_mmhg,
                                        outer.cuff_mmhg, outer.amplitude_mmhg,
                                        sp_threshold)
            break
    if systolic is None:
        raise NoSystolicCrossing("envelope never falls below 50% above MAP "
                                 "(deflation may have started below systolic)")

    diastolic = None
    dp_threshold = DP_RATIO * a_max
    for k in range(i_max, len(pts) - 1):  # walk toward lower pressures
        inner, outer = pts[k], pts[k + 1]
        if outer.amplitude_mmhg < dp_threshold <= inner.amplitude_mmhg:
            diastolic = _interp_crossing(inner.cuff_mmhg, inner.amplitude_mmhg,
                                         outer.cuff_mmhg, outer.amplitude_mmhg,
                                         dp_threshold)
            break
    if diastolic is None:
        raise NoDiastolicCrossing("envelope never falls below 70% below MAP")

    # Inter-beat timing from the strong central beats; tail beats are too
    # noise-prone to time reliably.
    central = [pt.beat_time_s for pt in pts if pt.amplitude_mmhg >= 0.5 * a_max]
    if len(central) < 3:
        central = [pt.beat_time_s for pt in pts]
    heart_rate = 60.0 / float(np.median(np.diff(np.array(central))))
    return BpResult(systolic=systolic, diastolic=diastolic,
                    map=map_mmhg, heart_rate=heart_rate)
