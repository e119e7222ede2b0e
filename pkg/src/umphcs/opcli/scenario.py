"""Scripted end-to-end sessions: a scenario file defines patients, the
per-test emulated-patient parameters, the transport, and optional expected
ranges; running it replays the whole desk setup deterministically.

Scenario files are JSON with the same canonical number conventions the
record store uses. Same scenario plus same seed gives a byte-identical
report and store file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import biosim, wireproto
from ..diagnostics import HeightInput, TemperatureCalib, height_from_pixels
from ..records import Patient, RecordStore, TestRecord, canon_num
from . import session as sess

DEFAULT_BASE_TIME = "2000-01-01T00:00:00Z"


class ScenarioParseError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    seed: int
    base_time: str
    transport_kind: str
    fault: wireproto.FaultProfile | None
    hearing_timeout_s: float
    patients: list[Patient]
    tests: list[dict] = field(default_factory=list)


def _fault_profile(obj: dict, default_seed: int) -> wireproto.FaultProfile:
    return wireproto.FaultProfile(
        drop_prob=obj.get("drop_prob", 0.0),
        corrupt_prob=obj.get("corrupt_prob", 0.0),
        seed=obj.get("seed", default_seed),
        latency_ms=obj.get("latency_ms", 2.0),
    )


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc, origin=path)


def parse_scenario(doc: dict, origin: str = "<scenario>") -> Scenario:
    try:
        seed = int(doc.get("seed", 0))
        transport = doc.get("transport", {"kind": "wired"})
        kind = transport.get("kind", "wired")
        fault = None
        if "fault" in transport:
            fault = _fault_profile(transport["fault"], seed)
        elif kind == "bluetooth":
            fault = wireproto.FaultProfile(seed=seed, latency_ms=transport.get("latency_ms", 2.0))
        patients = [Patient(patient_id=p["patient_id"], name=p.get("name", p["patient_id"]),
                            region=p["region"],
                            created_at=p.get("created_at", doc.get("base_time", DEFAULT_BASE_TIME)))
                    for p in doc.get("patients", [])]
        scenario = Scenario(
            name=doc.get("name", "scenario"),
            seed=seed,
            base_time=doc.get("base_time", DEFAULT_BASE_TIME),
            transport_kind=kind,
            fault=fault,
            hearing_timeout_s=doc.get("hearing_timeout_s", sess.HEARING_TIMEOUT_S),
            patients=patients,
            tests=list(doc.get("tests", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioParseError(f"{origin}: {exc}") from exc
    known = {p.patient_id for p in scenario.patients}
    for i, test in enumerate(scenario.tests):
        if test.get("patient") not in known:
            raise ScenarioParseError(f"{origin}: test {i + 1} references unknown patient "
                                     f"{test.get('patient')!r}")
        if test.get("test") not in ("temperature", "blood_pressure", "weight",
                                    "eye_power", "hearing", "height"):
            raise ScenarioParseError(f"{origin}: test {i + 1} has unknown kind "
                                     f"{test.get('test')!r}")
    return scenario


def cuff_params(test: dict, default_seed: int) -> biosim.CuffRunParams:
    return biosim.CuffRunParams(
        map_true=test["map"],
        amp_max=test.get("amp_max", 3.0),
        sigma=test.get("sigma", 15.0),
        heart_rate_hz=test.get("heart_rate_hz", 1.2),
        p_start=test.get("p_start", 180.0),
        deflation_rate=test.get("deflation_rate", 3.0),
        noise_sd=test.get("noise_sd", 0.0),
        seed=test.get("seed", default_seed),
    )


def hearing_profile(test: dict) -> biosim.HearingProfile:
    return biosim.HearingProfile({float(freq): float(db)
                                  for freq, db in test.get("profile", {}).items()})


def _run_one(test: dict, hub: sess.HubSession, scenario: Scenario,
             clock: sess.SessionClock) -> dict:
    kind = test["test"]
    if kind == "temperature":
        calib = TemperatureCalib(offset_c=test.get("offset_c", 0.0))
        payload = sess.measure_temperature(hub, test["true_temp_c"], calib)
        clock.advance(1.0)
    elif kind == "blood_pressure":
        params = cuff_params(test, scenario.seed)
        payload = sess.measure_blood_pressure(hub, params).payload
        clock.advance(params.duration_s)
    elif kind == "weight":
        payload = sess.measure_weight(hub, test["true_weight_kg"])
        clock.advance(1.0)
    elif kind == "eye_power":
        payload = sess.measure_eye_power(hub, pot_code=test.get("pot_code"),
                                         distance_m=test.get("distance_m"))
        clock.advance(1.0)
    elif kind == "hearing":
        run = sess.measure_hearing(hearing_profile(test), scenario.hearing_timeout_s)
        payload = run.payload
        clock.advance(run.elapsed_s)
    elif kind == "height":
        inp = HeightInput(ruler_top=tuple(test["ruler_top"]),
                          ruler_bottom=tuple(test["ruler_bottom"]),
                          head=tuple(test["head"]), foot=tuple(test["foot"]),
                          ruler_len=test["ruler_len"])
        payload = {"meters": height_from_pixels(inp)}
        clock.advance(1.0)
    else:  # unreachable after parse validation
        raise ScenarioParseError(f"unknown test kind {kind!r}")
    return payload


def _check_expect(payload: dict, expect: dict) -> list[str]:
    failures = []
    for fld, bounds in expect.items():
        value = payload.get(fld)
        lo, hi = bounds
        if value is None or not lo <= value <= hi:
            got = "missing" if value is None else canon_num(value)
            failures.append(f"{fld}={got} not in [{canon_num(lo)},{canon_num(hi)}]")
    return failures


@dataclass
class ScenarioReport:
    lines: list[str]
    ok: bool

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def run_scenario(scenario: Scenario, store: RecordStore,
                 device_id: str = "emu-0") -> ScenarioReport:
    """Execute every scheduled test in order, saving records as it goes."""
    clock = sess.SessionClock(scenario.base_time)
    hub = sess.HubSession(scenario.transport_kind, scenario.fault)
    for patient in scenario.patients:
        store.save_patient(patient)

    lines = [f"scenario: {scenario.name}", f"seed: {scenario.seed}"]
    passed = failed = 0
    for i, test in enumerate(scenario.tests, start=1):
        kind, patient_id = test["test"], test["patient"]
        try:
            payload = _run_one(test, hub, scenario, clock)
        except (sess.MeasurementError, ValueError) as exc:
            code = getattr(exc, "code", "measurement-failed")
            lines.append(f"{i} {kind} {patient_id} ERROR {code}")
            failed += 1
            continue
        record = TestRecord(record_id=store.next_record_id(), patient_id=patient_id,
                            kind=kind, payload=payload, taken_at=clock.now(),
                            device_id=device_id)
        store.save_record(record)
        shown = " ".join(f"{k}={_fmt_value(v)}" for k, v in record.payload.items())
        problems = _check_expect(record.payload, test.get("expect", {}))
        if problems:
            lines.append(f"{i} {kind} {patient_id} {shown} FAIL {'; '.join(problems)}")
            failed += 1
        else:
            lines.append(f"{i} {kind} {patient_id} {shown} PASS")
            passed += 1
    lines.append(f"result: {passed}/{passed + failed} pass")
    return ScenarioReport(lines=lines, ok=failed == 0)


def _fmt_value(v) -> str:
    if isinstance(v, dict):
        return "{" + ",".join(f"{k}:{'NR' if x is None else canon_num(x)}"
                              for k, x in v.items()) + "}"
    return canon_num(v)
