"""Acceptance suite: one test per acceptance criterion, at the stated
tolerance, each printing one [PASS]/[FAIL] line (run with -s to see them
live)."""

import math
import random
import socket
import time

import numpy as np

from umphcs import biosim, hubsim, sync, wireproto as wp
from umphcs import records as rec
from umphcs.diagnostics import (
    LensBench,
    PotCalib,
    bp as bpm,
    eye_power,
    eye_power_trace,
    HeightInput,
    height_from_pixels,
    hearing as hr,
    pot_to_distance,
    pressure_from_code,
    temperature_from_code,
    weight_from_code,
    TwoPointCalib,
)
from umphcs.opcli import session as sess
from umphcs.opcli.scenario import load_scenario, run_scenario
from umphcs.records import RecordStore

DEMO = __file__.rsplit("/", 2)[0] + "/scenarios/demo.json"
MODEL = hubsim.AdcModel()


def criterion(name: str, ok: bool, detail: str = ""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


TABLE = {
    (-2.0, 5.0): {1.5: -1.3, 2: 0.266667, 2.5: 1.833333, 3: 3.4, 3.5: 4.966667,
                  4: 6.533333, 4.5: 8.1, 5: 9.666667, 5.5: 11.23333, 6: 12.8,
                  6.5: 14.36667, 7: 15.93333, 7.5: 17.5},
    (2.0, -5.0): {1.5: 0.7, 2: -1.06667, 2.5: -2.83333, 3: -4.6, 3.5: -6.36667,
                  4: -8.13333, 4.5: -9.9, 5: -11.6667, 5.5: -13.4333, 6: -15.2,
                  6.5: -16.9667, 7: -18.7333, 7.5: -20.5},
}


def printed_decimals(x: float) -> int:
    text = repr(x)
    return len(text.split(".")[1]) if "." in text else 0


def test_table_reproduction():
    start = time.perf_counter()
    worst = 0.0
    ok = True
    for (p1, p2), column in TABLE.items():
        bench = LensBench(p1=p1, p2=p2)
        for d_cm, printed in column.items():
            # table entries rounded to fewer decimals get the print half-ulp
            tol = max(1e-5, 0.5 * 10 ** -printed_decimals(printed))
            err = abs(eye_power(d_cm / 100.0, bench) - printed)
            worst = max(worst, err)
            ok = ok and err <= tol
    elapsed = time.perf_counter() - start
    criterion("Table reproduction: 13 distances x 2 lens pairs",
              ok and elapsed < 1.0,
              f"worst |err|={worst:.2e}, {elapsed*1e3:.1f} ms")


def test_eye_power_range():
    grid = np.linspace(0.015, 0.075, 10_001)
    powers = [eye_power(d) for d in grid]
    lo, hi = min(powers), max(powers)
    criterion("Eye-power range over the pot travel is -1.30 .. 17.50 D",
              abs(lo - (-1.30)) <= 1e-2 and abs(hi - 17.50) <= 1e-2,
              f"min={lo:.4f}, max={hi:.4f}")


def test_trace_vs_closed_form():
    rng = random.Random(424242)
    worst = 0.0
    checked = 0
    while checked < 1000:
        d = rng.uniform(0.01, 0.09)
        p1 = rng.choice([-1, 1]) * rng.uniform(0.5, 8.0)
        p2 = rng.choice([-1, 1]) * rng.uniform(0.5, 8.0)
        if abs(1 / p1 + 1 / p2 - d) < 1e-6:
            continue
        bench = LensBench(p1=p1, p2=p2, l=rng.uniform(0.01, 0.05),
                          L=rng.uniform(0.005, 0.03))
        a = eye_power(d, bench)
        b = eye_power_trace(d, bench).power
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-9))
        checked += 1
    criterion("Stepwise trace equals closed form to 1e-12 relative (1000 benches)",
              worst <= 1e-12, f"worst rel diff={worst:.2e}")


def test_oscillometric_recovery():
    start = time.perf_counter()
    rng = random.Random(20260811)
    hits = 0
    runs = 200
    for _ in range(runs):
        params = biosim.CuffRunParams(
            map_true=rng.uniform(70, 130), amp_max=rng.uniform(1.5, 4.0),
            sigma=rng.uniform(8, 20), heart_rate_hz=rng.uniform(0.8, 2.5),
            noise_sd=rng.uniform(0.0, 0.3), seed=rng.getrandbits(32))
        series = biosim.cuff_series(params)
        try:
            res = bpm.estimate_bp(bpm.ow_envelope(bpm.extract_ow(series), series))
        except bpm.BpPipelineError:
            continue
        if (abs(res.systolic - params.sp_true) <= 3.0
                and abs(res.diastolic - params.dp_true) <= 3.0
                and abs(res.heart_rate - params.heart_rate_hz * 60.0) <= 2.0):
            hits += 1
    elapsed = time.perf_counter() - start
    criterion("Oscillometric recovery: >=95% of 200 runs within +/-3 mmHg, +/-2 bpm",
              hits >= 0.95 * runs and elapsed < 30.0,
              f"{hits}/{runs} in tolerance, {elapsed:.1f} s")


def test_height_sensitivity():
    base = HeightInput(ruler_top=(100.0, 50.0), ruler_bottom=(100.0, 250.0),
                       head=(300.0, 40.0), foot=(300.0, 640.0), ruler_len=0.5)
    exact = height_from_pixels(base) == 1.5
    slip = 0.02 * 200.0
    worst = 0.0
    steps = np.linspace(-slip, slip, 5)
    for dx1 in steps:
        for dy1 in steps:
            for dx2 in steps:
                for dy2 in steps:
                    perturbed = HeightInput(
                        ruler_top=(100.0 + dx1, 50.0 + dy1),
                        ruler_bottom=(100.0 + dx2, 250.0 + dy2),
                        head=base.head, foot=base.foot, ruler_len=0.5)
                    worst = max(worst, abs(height_from_pixels(perturbed) - 1.5) / 1.5)
    criterion("Height: exact ratio clean; <=4.2% under 2% ruler-mark slips",
              exact and worst <= 0.042, f"worst rel err={worst:.4f}")


def test_round_trip_quantization():
    rng = random.Random(99)
    pot = PotCalib()
    calib = TwoPointCalib(
        code_lo=hubsim.quantize(MODEL, biosim.loadcell_voltage(10.0)), value_lo=10.0,
        code_hi=hubsim.quantize(MODEL, biosim.loadcell_voltage(140.0)), value_hi=140.0)
    pressure_lsb = 7.50062 / (5.0 * 0.018) * MODEL.lsb_volts
    worst = {"temp": 0.0, "weight": 0.0, "dist": 0.0, "press": 0.0}
    for _ in range(100):
        t = rng.uniform(30.0, 45.0)
        worst["temp"] = max(worst["temp"], abs(
            temperature_from_code(hubsim.quantize(MODEL, biosim.lm35_voltage(t))) - t))
        w = rng.uniform(0.5, 149.5)
        worst["weight"] = max(worst["weight"], abs(
            weight_from_code(hubsim.quantize(MODEL, biosim.loadcell_voltage(w)), calib) - w))
        d = rng.uniform(0.015, 0.075)
        worst["dist"] = max(worst["dist"], abs(
            pot_to_distance(hubsim.quantize(MODEL, biosim.slidepot_voltage(d, pot)), pot) - d))
        p = rng.uniform(30.0, 370.0)
        worst["press"] = max(worst["press"], abs(
            pressure_from_code(hubsim.quantize(MODEL, biosim.mpx_voltage(p))) - p))
    ok = (worst["temp"] <= 0.5 and worst["weight"] <= 0.2
          and worst["dist"] <= 6e-5 and worst["press"] <= pressure_lsb)
    criterion("Round-trip quantization within one LSB on all four pipelines", ok,
              f"temp {worst['temp']:.3f} C, weight {worst['weight']:.3f} kg, "
              f"dist {worst['dist']:.2e} m, pressure {worst['press']:.3f} mmHg")


def test_hearing_oracle():
    rng = random.Random(31415)
    ok = True
    for _ in range(50):
        profile = biosim.HearingProfile({
            float(f): rng.uniform(-10.0, 120.0)
            for f in hr.SWEEP_FREQUENCIES_HZ if rng.random() > 0.15})
        steps = [0]

        def respond(freq, level):
            steps[0] += 1
            return biosim.hearing_response(profile, float(freq), level)

        gram = hr.audiogram(hr.run_sweep(respond))
        if steps[0] > 108:
            ok = False
        for freq in hr.SWEEP_FREQUENCIES_HZ:
            true = profile.threshold_db.get(float(freq))
            if true is None or true > hr.LEVEL_MAX_DB:
                expected = None
            else:
                expected = hr.LEVEL_MIN_DB + hr.LEVEL_STEP_DB * max(
                    0, math.ceil((true - hr.LEVEL_MIN_DB) / hr.LEVEL_STEP_DB))
            ok = ok and gram[freq] == expected
    criterion("Hearing: smallest grid level >= threshold, NoResponse above 80 dB, "
              "<=108 steps", ok)


def test_protocol_robustness():
    # fault-free lockstep for 10,000 cycles
    hub = sess.HubSession("wired")
    hub.attach(biosim.TemperatureModule(36.6))
    clean = sum(1 for _ in range(10_000) if hub.exchange(attempts=1) == 74)

    # faulty stream: decoder classifies everything, state stays bounded
    profile = wp.FaultProfile(drop_prob=0.02, corrupt_prob=0.02, seed=5)
    stream = wp.apply_faults(profile, b"".join(
        wp.encode_response(wp.AdcValue(i % 1024)) for i in range(10_000)))
    state = wp.DecoderState()
    complete = malformed = 0
    for offset in range(0, len(stream), 64):
        outcome = wp.decode_response(stream[offset:offset + 64], state)
        while not isinstance(outcome, wp.NeedMore):
            if isinstance(outcome, wp.Complete):
                complete += 1
            else:
                malformed += 1
            outcome = wp.decode_response(b"", state)
        assert len(state.pending) <= wp.MAX_FRAME_BYTES

    # BP run over the faulty bluetooth link still lands inside +/-3 mmHg
    params = biosim.CuffRunParams(map_true=100.0, amp_max=3.0, sigma=15.0,
                                  heart_rate_hz=1.2, noise_sd=0.1, seed=0)
    fault = wp.FaultProfile(drop_prob=0.02, corrupt_prob=0.02, seed=0, latency_ms=2.0)
    run = sess.measure_blood_pressure(sess.HubSession("bluetooth", fault), params)
    bp_ok = (abs(run.payload["systolic"] - params.sp_true) <= 3.0
             and abs(run.payload["diastolic"] - params.dp_true) <= 3.0)
    criterion("Protocol robustness: lockstep 10k clean, total classification "
              "under faults, BP within +/-3 via retries",
              clean == 10_000 and complete + malformed > 0 and bp_ok,
              f"clean={clean}/10000, faulty frames: {complete} complete + "
              f"{malformed} malformed, BP gaps={run.gaps}")


def test_sync_byte_exactness(tmp_path):
    store = RecordStore(str(tmp_path / "local.jsonl"))
    rng = random.Random(2)
    for i in range(10):
        store.save_patient(rec.Patient(patient_id=f"p{i}", name=f"n{i}", region="dhaka",
                                       created_at="2000-01-01T00:00:00Z"))
    for i in range(1000):
        pid = f"p{i % 10}"
        store.save_record(rec.TestRecord(
            record_id=f"r-{i:06d}", patient_id=pid, kind="weight",
            payload={"kg": round(rng.uniform(40, 90), 3)},
            taken_at=f"2000-01-01T{i // 3600:02d}:{(i // 60) % 60:02d}:{i % 60:02d}Z"))

    server = sync.SyncServer(sync.ServerStore())
    server.serve_in_background()
    try:
        # interrupted upload: cut the link after 400 acknowledgements
        class CutAt400(sync.LineConnection):
            oks = 0

            def recv(self):
                reply = super().recv()
                if reply.startswith("OK r-"):
                    CutAt400.oks += 1
                    if CutAt400.oks > 400:
                        self.close()
                        raise sync.SyncConnectionLost("cut")
                return reply

        host, port = server.endpoint.rsplit(":", 1)
        try:
            sync.client_sync(store, conn=CutAt400(
                socket.create_connection((host, int(port)))))
        except sync.SyncConnectionLost:
            pass
        resumed = sync.client_sync(store, endpoint=server.endpoint)
        rerun = sync.client_sync(store, endpoint=server.endpoint)

        byte_exact = all(
            server.store.list_lines(f"p{i}") ==
            [r.canonical_line() for r in store.history(f"p{i}")]
            for i in range(10))
        total_server = sum(len(server.store.list_lines(f"p{i}")) for i in range(10))
        criterion("Sync: 1000 records byte-identical, resumable, replay no-op",
                  byte_exact and total_server == 1000
                  and resumed["uploaded"] == 600 and rerun == {"uploaded": 0, "skipped": 1000},
                  f"server holds {total_server}, resume uploaded {resumed['uploaded']}")
    finally:
        server.shutdown()
        server.server_close()


def test_scenario_determinism(tmp_path):
    scenario = load_scenario(DEMO)
    artifacts = []
    for i in range(2):
        path = str(tmp_path / f"store-{i}.jsonl")
        store = RecordStore(path)
        report = run_scenario(scenario, store)
        store.close()
        artifacts.append((open(path, "rb").read(), report.text, report.ok))
    criterion("Determinism: fixed-seed scenario gives byte-identical store and report",
              artifacts[0] == artifacts[1] and artifacts[0][2],
              f"store {len(artifacts[0][0])} bytes, report {len(artifacts[0][1])} chars")
