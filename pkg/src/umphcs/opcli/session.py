"""Measurement sessions: drive the emulated hub through the wire protocol
and turn sample streams into record payloads.

One HubSession owns one transport link and one hub for its lifetime; the
virtual clock is advanced here, never by wall time. Blood pressure streams
one command per 10 ms of simulated time down to the deflation floor; a
sample whose retries all fail becomes a gap (bridged by interpolation),
and three consecutive gaps abort the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np
from scipy.signal import butter, lfilter, medfilt

from .. import biosim, hubsim, wireproto
from ..diagnostics import bp as bp_mod
from ..diagnostics import (
    LensBench,
    PotCalib,
    TemperatureCalib,
    TwoPointCalib,
    eye_power,
    pot_to_distance,
    pressure_from_code,
    temperature_from_code,
    weight_from_code,
)
from ..diagnostics.hearing import HEARD, NOT_HEARD, HearingState, audiogram, hearing_step
from ..records import canon_timestamp

BP_SAMPLE_RATE_HZ = 100.0  # one command every 10 ms
MAX_CONSECUTIVE_GAPS = 3
ATTEMPTS_PER_SAMPLE = 3
# Between accepted samples (worst case: across a 2-tick gap) the cuff moves
# by deflation (0.09 mmHg) plus an oscillation swing (< 4 mmHg) plus noise;
# anything further off is a mangled frame, not a measurement.
PRESSURE_JUMP_LIMIT_MMHG = 8.0
DEFAULT_WEIGHT_CALIB = TwoPointCalib(code_lo=0, value_lo=0.0, code_hi=819, value_hi=150.0)
HEARING_TIMEOUT_S = 3.0
PRESENTATION_S = 1.0


class MeasurementError(RuntimeError):
    code = "measurement-failed"


class HubRefused(MeasurementError):
    """The hub answered ERR: cutoff engaged, no module, or bad channel."""
    code = "hub-refused"


class LinkLost(MeasurementError):
    """Too many consecutive samples lost to the link."""
    code = "link-lost"


class SessionClock:
    """Record timestamps: simulated from a fixed base, or wall time."""

    def __init__(self, base: str | None = None):
        self._base = None
        self._elapsed = 0.0
        if base is not None:
            self._base = datetime.fromisoformat(base.replace("Z", "+00:00"))
            if self._base.tzinfo is None:
                self._base = self._base.replace(tzinfo=timezone.utc)

    def advance(self, seconds: float) -> None:
        self._elapsed += seconds

    def now(self) -> str:
        if self._base is None:
            return canon_timestamp(datetime.now(timezone.utc))
        return canon_timestamp(self._base + timedelta(seconds=self._elapsed))


class HubSession:
    def __init__(self, transport: str = "wired",
                 fault: wireproto.FaultProfile | None = None,
                 adc: hubsim.AdcModel | None = None):
        self.link = wireproto.Link(transport, fault)
        self.hub = hubsim.SensorHub(self.link.hub, adc)
        self.decoder = wireproto.DecoderState()

    def attach(self, module: hubsim.VirtualModule) -> None:
        hubsim.configure(self.hub.state, "safety_off")
        hubsim.configure(self.hub.state, "attach", module)
        hubsim.configure(self.hub.state, "safety_on")

    def engage_cutoff(self) -> None:
        hubsim.configure(self.hub.state, "safety_off")

    def exchange(self, cmd: wireproto.HubCommand = wireproto.HubCommand.SAMPLE_RAW,
                 at_ms: float = 0.0, validate=None,
                 attempts: int = ATTEMPTS_PER_SAMPLE) -> int | None:
        """One lockstep request/response, retried over a lossy link.

        Returns the ADC code, or None when every attempt was lost or
        mangled. A well-formed ERR frame raises HubRefused at once: the
        hub refusing is deterministic, retrying cannot help.
        """
        self.hub.state.clock = at_ms
        for _ in range(attempts):
            self.link.host.write(wireproto.encode_command(cmd))
            self.link.advance(self.link.latency_ms)
            self.hub.pump()
            self.link.advance(self.link.latency_ms)
            data = self.link.host.read()
            code = None
            outcome = wireproto.decode_response(data, self.decoder)
            while not isinstance(outcome, wireproto.NeedMore):
                if isinstance(outcome, wireproto.Complete):
                    if isinstance(outcome.response, wireproto.HubError):
                        raise HubRefused("hub answered ERR")
                    candidate = outcome.response.code
                    if validate is None or validate(candidate):
                        code = candidate
                outcome = wireproto.decode_response(b"", self.decoder)
            if code is not None:
                return code
            # Lockstep: whatever was going to arrive has arrived, so any
            # half-frame left in the decoder is dead bytes that would only
            # poison the retry. Start the next attempt clean.
            self.decoder = wireproto.DecoderState()
        return None


def measure_temperature(session: HubSession, true_temp_c: float,
                        calib: TemperatureCalib = TemperatureCalib()) -> dict:
    session.attach(biosim.TemperatureModule(true_temp_c))
    code = session.exchange()
    if code is None:
        raise LinkLost("temperature sample lost")
    return {"celsius": temperature_from_code(code, calib)}


def measure_weight(session: HubSession, true_weight_kg: float,
                   calib: TwoPointCalib = DEFAULT_WEIGHT_CALIB) -> dict:
    session.attach(biosim.WeightModule(true_weight_kg))
    code = session.exchange()
    if code is None:
        raise LinkLost("weight sample lost")
    return {"kg": weight_from_code(code, calib)}


def measure_eye_power(session: HubSession, pot_code: int | None = None,
                      distance_m: float | None = None,
                      bench: LensBench = LensBench(),
                      pot: PotCalib = PotCalib()) -> dict:
    """The operator has slid the pot to a position (given as the target
    code or the physical distance); sample it back through the hub."""
    if distance_m is None:
        if pot_code is None:
            raise MeasurementError("need pot_code or distance_m")
        distance_m = pot_to_distance(pot_code, pot)
    session.attach(biosim.PotModule(distance_m, pot))
    code = session.exchange()
    if code is None:
        raise LinkLost("pot sample lost")
    d = pot_to_distance(code, pot)
    return {"diopters": eye_power(d, bench), "distance_m": d}


@dataclass
class BpRun:
    payload: dict
    samples: int
    gaps: int


def measure_blood_pressure(session: HubSession, params: biosim.CuffRunParams,
                           on_sample=None, should_stop=None) -> BpRun:
    """Stream the deflation run and push it through the oscillometric
    pipeline. on_sample(t_s, cuff_mmhg, ow_causal) sees every kept sample
    (the causal band-pass is display-only; the result uses the zero-phase
    pipeline)."""
    session.attach(biosim.CuffModule(params))
    n = int(math.floor(params.duration_s * BP_SAMPLE_RATE_HZ)) + 1
    tick_ms = 1000.0 / BP_SAMPLE_RATE_HZ

    b, a = butter(bp_mod.FILTER_ORDER, bp_mod.BAND_HZ, btype="bandpass",
                  fs=BP_SAMPLE_RATE_HZ)
    zi = np.zeros(max(len(a), len(b)) - 1)

    values = np.full(n, np.nan)
    # The app inflated the cuff, so the starting pressure is known: that
    # anchors the plausibility window before the first sample arrives,
    # otherwise one mangled first frame could poison the whole run.
    last_good = params.p_start
    consecutive_gaps = 0
    gaps = 0

    def plausible(code: int) -> bool:
        return abs(pressure_from_code(code) - last_good) <= PRESSURE_JUMP_LIMIT_MMHG

    for i in range(n):
        if should_stop is not None and should_stop():
            values = values[: i]
            break
        code = session.exchange(at_ms=i * tick_ms, validate=plausible)
        if code is None:
            consecutive_gaps += 1
            gaps += 1
            if consecutive_gaps >= MAX_CONSECUTIVE_GAPS:
                raise LinkLost(f"{MAX_CONSECUTIVE_GAPS} consecutive samples lost")
            continue
        consecutive_gaps = 0
        p = pressure_from_code(code)
        last_good = p
        values[i] = p
        if on_sample is not None:
            ow_disp, zi = lfilter(b, a, [p], zi=zi)
            on_sample(i * tick_ms / 1000.0, p, float(ow_disp[0]))

    good = ~np.isnan(values)
    if good.sum() < 2:
        raise LinkLost("no usable samples")
    idx = np.arange(len(values))
    filled = np.interp(idx, idx[good], values[good])
    # Low cuff pressures have short frames, so a dropped digit can land
    # inside the plausibility window; a 50 ms rolling median erases such
    # one-off spikes and costs the 1.2 Hz oscillation only ~1% amplitude,
    # which the ratio method cancels anyway.
    filled = medfilt(filled, kernel_size=5)
    t = idx / BP_SAMPLE_RATE_HZ
    series = list(zip(t.tolist(), filled.tolist()))

    ow = bp_mod.extract_ow(series, BP_SAMPLE_RATE_HZ)
    env = bp_mod.ow_envelope(ow, series)
    result = bp_mod.estimate_bp(env)
    payload = {"systolic": result.systolic, "diastolic": result.diastolic,
               "map": result.map, "heart_rate": result.heart_rate}
    return BpRun(payload=payload, samples=len(values), gaps=gaps)


@dataclass
class HearingRun:
    payload: dict
    steps: int
    elapsed_s: float


def measure_hearing(profile: biosim.HearingProfile,
                    timeout_s: float = HEARING_TIMEOUT_S) -> HearingRun:
    """Scripted sweep against a simulated patient. Each presentation takes
    nominal time; an unheard tone costs the operator timeout."""
    state = HearingState()
    steps = 0
    elapsed = 0.0
    while not state.finished:
        heard = biosim.hearing_response(profile, state.current_freq_hz, state.level_db)
        elapsed += PRESENTATION_S if heard else timeout_s
        state = hearing_step(state, HEARD if heard else NOT_HEARD)
        steps += 1
    gram = {str(freq): level for freq, level in audiogram(state).items()}
    return HearingRun(payload={"audiogram": gram}, steps=steps, elapsed_s=elapsed)
