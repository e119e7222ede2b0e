"""HTTP gateway for the web operator console.

Endpoints (JSON bodies, canonical number rendering):

    GET  /patients               patients with history and screening flags
    POST /session/start          {"patient","test","params"?}
    POST /session/hearing/event  {"heard": bool}
    POST /session/pot            {"code": 0..1023}
    POST /session/stop
    GET  /session/result
    GET  /session/stream         one-way SSE: BP {t_s,cuff_mmHg,ow},
                                 hearing {freq_hz,level_db,state}

Exactly one session is active at a time; operating on a missing or
finished session answers 409 so the console can surface a banner. The
console computes nothing medical: every displayed number comes from these
responses.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..diagnostics import HeightInput, LensBench, PotCalib, height_from_pixels
from ..diagnostics.hearing import HEARD, NOT_HEARD, audiogram, hearing_step
from ..records import RecordStore, TestRecord, canon_dumps, screen_region, screen_weight
from . import session as sess
from .advice import advise
from .scenario import Scenario, cuff_params, load_scenario

logger = logging.getLogger(__name__)

DEFAULT_PACE_S = 0.0005  # wall-clock pause per BP sample: fast, still streams live

BUILTIN_PARAMS = {
    "temperature": {"true_temp_c": 36.8},
    "weight": {"true_weight_kg": 70.0},
    "blood_pressure": {"map": 100.0, "sigma": 15.0, "amp_max": 3.0,
                       "heart_rate_hz": 1.2, "noise_sd": 0.1, "seed": 42},
}


class GwSession:
    def __init__(self, kind: str, patient_id: str):
        self.kind = kind
        self.patient_id = patient_id
        self.phase = "running"
        self.record_id: str | None = None
        self.result: dict | None = None
        self.error: str | None = None
        self.stop_event = threading.Event()
        self.thread: threading.Thread | None = None
        self.subscribers: list[queue.Queue] = []
        self.hearing_state: "sess.HearingState | None" = None
        self.pot_last: dict | None = None
        self._sub_lock = threading.Lock()

    def publish(self, event: dict | None) -> None:
        with self._sub_lock:
            subs = list(self.subscribers)
        for q in subs:
            q.put(event)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._sub_lock:
            self.subscribers.append(q)
        if self.phase in ("done", "error"):
            q.put(None)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._sub_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def finish(self, payload: dict | None, record_id: str | None,
               error: str | None) -> None:
        self.result = payload
        self.record_id = record_id
        self.error = error
        self.phase = "error" if error else "done"
        self.publish(None)


class GatewayApp:
    def __init__(self, store: RecordStore, scenario: Scenario | None = None,
                 pace_s: float = DEFAULT_PACE_S, device_id: str = "gw-0",
                 bench: LensBench | None = None, pot: PotCalib | None = None):
        self.store = store
        self.scenario = scenario
        self.pace_s = pace_s
        self.device_id = device_id
        self.bench = bench or LensBench()
        self.pot = pot or PotCalib()
        self.lock = threading.RLock()
        self.session: GwSession | None = None
        self.clock = sess.SessionClock()

    # ----- helpers -------------------------------------------------------

    def _default_params(self, kind: str) -> dict:
        if self.scenario is not None:
            for test in self.scenario.tests:
                if test["test"] == kind:
                    return {k: v for k, v in test.items() if k not in ("test", "patient", "expect")}
        return dict(BUILTIN_PARAMS.get(kind, {}))

    def _save(self, session: GwSession, payload: dict) -> str:
        record = TestRecord(record_id=self.store.next_record_id(),
                            patient_id=session.patient_id, kind=session.kind,
                            payload=payload, taken_at=self.clock.now(),
                            device_id=self.device_id)
        return self.store.save_record(record)

    # ----- endpoint logic -------------------------------------------------

    def patients_view(self) -> dict:
        patients = []
        regions = set()
        for p in self.store.patients():
            regions.add(p.region)
            hist = [{"record_id": r.record_id, "kind": r.kind,
                     "taken_at": r.taken_at, "payload": r.payload}
                    for r in self.store.history(p.patient_id)]
            flag = screen_weight(self.store.history(p.patient_id, "weight"))
            patients.append({
                "patient_id": p.patient_id, "name": p.name, "region": p.region,
                "created_at": p.created_at, "history": hist,
                "weight_flag": None if flag is None else {
                    "rule": flag.rule, "severity": flag.severity,
                    "evidence": list(flag.evidence)},
            })
        alerts = []
        for region in sorted(regions):
            alert = screen_region(self.store, region)
            if alert is not None:
                alerts.append(alert.to_payload())
        return {"patients": patients, "region_alerts": alerts}

    def start(self, body: dict) -> tuple[int, dict]:
        kind = body.get("test")
        patient_id = body.get("patient")
        if kind not in ("temperature", "blood_pressure", "weight",
                        "eye_power", "hearing", "height"):
            return 400, {"error": f"unknown test {kind!r}"}
        try:
            self.store.get_patient(patient_id)
        except Exception:
            return 400, {"error": f"unknown patient {patient_id!r}"}
        with self.lock:
            if self.session is not None and self.session.phase in ("running", "awaiting-response"):
                return 409, {"error": "a session is already active"}
            session = GwSession(kind, patient_id)
            self.session = session
        params = self._default_params(kind)
        params.update(body.get("params") or {})
        try:
            if kind == "blood_pressure":
                session.thread = threading.Thread(
                    target=self._run_bp, args=(session, params), daemon=True)
                session.thread.start()
            elif kind == "hearing":
                session.hearing_state = sess.HearingState()
                session.phase = "awaiting-response"
                session.publish(self._hearing_event(session, "presenting"))
            elif kind == "eye_power":
                session.phase = "awaiting-response"
            else:
                payload = self._run_instant(kind, params)
                session.finish(payload, self._save(session, payload), None)
        except sess.MeasurementError as exc:
            session.finish(None, None, exc.code)
        except ValueError as exc:
            session.finish(None, None, f"bad-params: {exc}")
        return 200, self.result_view()

    def _run_instant(self, kind: str, params: dict) -> dict:
        hub = sess.HubSession()
        if kind == "temperature":
            return sess.measure_temperature(hub, params["true_temp_c"])
        if kind == "weight":
            return sess.measure_weight(hub, params["true_weight_kg"])
        if kind == "height":
            inp = HeightInput(ruler_top=tuple(params["ruler_top"]),
                              ruler_bottom=tuple(params["ruler_bottom"]),
                              head=tuple(params["head"]), foot=tuple(params["foot"]),
                              ruler_len=params["ruler_len"])
            return {"meters": height_from_pixels(inp)}
        raise sess.MeasurementError(f"no instant runner for {kind}")

    def _run_bp(self, session: GwSession, params: dict) -> None:
        try:
            run_params = cuff_params({"test": "blood_pressure", **params},
                                     params.get("seed", 0))
            hub = sess.HubSession()

            def on_sample(t_s: float, cuff: float, ow: float) -> None:
                session.publish({"t_s": t_s, "cuff_mmHg": cuff, "ow": ow})
                if self.pace_s > 0:
                    time.sleep(self.pace_s)

            run = sess.measure_blood_pressure(hub, run_params, on_sample=on_sample,
                                              should_stop=session.stop_event.is_set)
            session.finish(run.payload, self._save(session, run.payload), None)
        except sess.MeasurementError as exc:
            session.finish(None, None, exc.code)
        except Exception as exc:  # pipeline errors carry their class name
            session.finish(None, None, type(exc).__name__)

    def _hearing_event(self, session: GwSession, state: str) -> dict:
        hs = session.hearing_state
        return {"freq_hz": hs.current_freq_hz if not hs.finished else 0,
                "level_db": hs.level_db if not hs.finished else 0,
                "state": state}

    def hearing_event(self, body: dict) -> tuple[int, dict]:
        with self.lock:
            session = self.session
            if session is None or session.kind != "hearing" \
                    or session.phase != "awaiting-response":
                return 409, {"error": "no active session"}
            heard = bool(body.get("heard"))
            session.hearing_state = hearing_step(session.hearing_state,
                                                 HEARD if heard else NOT_HEARD)
            if session.hearing_state.finished:
                gram = {str(freq): level
                        for freq, level in audiogram(session.hearing_state).items()}
                payload = {"audiogram": gram}
                session.publish({"freq_hz": 0, "level_db": 0, "state": "finished"})
                session.finish(payload, self._save(session, payload), None)
                return 200, self.result_view()
            session.publish(self._hearing_event(session, "presenting"))
            return 200, {"freq_hz": session.hearing_state.current_freq_hz,
                         "level_db": session.hearing_state.level_db,
                         "finished": False}

    def pot_event(self, body: dict) -> tuple[int, dict]:
        with self.lock:
            session = self.session
            if session is None or session.kind != "eye_power" \
                    or session.phase != "awaiting-response":
                return 409, {"error": "no active session"}
            code = body.get("code")
            if not isinstance(code, int) or not 0 <= code <= 1023:
                return 400, {"error": "code must be an integer in 0..1023"}
            hub = sess.HubSession()
            payload = sess.measure_eye_power(hub, pot_code=code,
                                             bench=self.bench, pot=self.pot)
            session.pot_last = {"code": code, "distance_m": payload["distance_m"],
                                "power_d": payload["diopters"]}
            return 200, dict(session.pot_last)

    def stop(self) -> tuple[int, dict]:
        with self.lock:
            session = self.session
            if session is None:
                return 409, {"error": "no active session"}
            if session.phase in ("done", "error"):
                return 200, self.result_view()
            if session.kind == "blood_pressure":
                session.stop_event.set()
                thread = session.thread
        if session.kind == "blood_pressure":
            if thread is not None:
                thread.join(timeout=30)
            return 200, self.result_view()
        with self.lock:
            if session.kind == "eye_power":
                if session.pot_last is None:
                    session.finish(None, None, "no-pot-position")
                else:
                    payload = {"diopters": session.pot_last["power_d"],
                               "distance_m": session.pot_last["distance_m"]}
                    session.finish(payload, self._save(session, payload), None)
            else:  # hearing stopped mid-sweep: nothing to save
                session.finish(None, None, "aborted")
            return 200, self.result_view()

    def result_view(self) -> dict:
        with self.lock:
            session = self.session
            if session is None:
                return {"phase": "idle"}
            view = {"phase": session.phase, "test": session.kind,
                    "patient": session.patient_id}
            if session.record_id is not None:
                view["record_id"] = session.record_id
            if session.result is not None:
                view["result"] = session.result
                view["suggestions"] = advise(session.kind, session.result)
            if session.error is not None:
                view["error"] = session.error
            return view


class GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: "GatewayServer"

    def log_message(self, fmt, *args):
        logger.debug("gateway: " + fmt, *args)

    def _send_json(self, status: int, obj: dict) -> None:
        body = canon_dumps(obj).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except json.JSONDecodeError:
            return {}

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        app = self.server.app
        if self.path == "/patients":
            self._send_json(200, app.patients_view())
        elif self.path == "/session/result":
            self._send_json(200, app.result_view())
        elif self.path == "/session/stream":
            self._stream()
        else:
            self._static()

    def do_POST(self):
        app = self.server.app
        body = self._read_body()
        if self.path == "/session/start":
            status, obj = app.start(body)
        elif self.path == "/session/hearing/event":
            status, obj = app.hearing_event(body)
        elif self.path == "/session/pot":
            status, obj = app.pot_event(body)
        elif self.path == "/session/stop":
            status, obj = app.stop()
        else:
            status, obj = 404, {"error": "no such endpoint"}
        self._send_json(status, obj)

    def _stream(self):
        app = self.server.app
        with app.lock:
            session = app.session
        if session is None:
            self._send_json(409, {"error": "no active session"})
            return
        q = session.subscribe()
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            while True:
                try:
                    event = q.get(timeout=0.5)
                except queue.Empty:
                    self.wfile.write(b": ping\n\n")
                    self.wfile.flush()
                    continue
                if event is None:
                    self.wfile.write(b"event: end\ndata: {}\n\n")
                    self.wfile.flush()
                    return
                data = canon_dumps(event).encode("utf-8")
                self.wfile.write(b"data: " + data + b"\n\n")
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            session.unsubscribe(q)

    def _static(self):
        webroot = self.server.webroot
        if webroot is None:
            self._send_json(404, {"error": "no such endpoint"})
            return
        rel = "index.html" if self.path in ("/", "") else self.path.lstrip("/")
        path = os.path.normpath(os.path.join(webroot, rel))
        if not path.startswith(os.path.abspath(webroot)) or not os.path.isfile(path):
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(path)[0] or "application/octet-stream"
        with open(path, "rb") as fh:
            body = fh.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class GatewayServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, app: GatewayApp, host: str = "127.0.0.1", port: int = 0,
                 webroot: str | None = None):
        self.app = app
        self.webroot = os.path.abspath(webroot) if webroot else None
        super().__init__((host, port), GatewayHandler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def build_gateway(store_path: str, host: str = "127.0.0.1", port: int = 0,
                  webroot: str | None = None, scenario_path: str | None = None,
                  pace_s: float = DEFAULT_PACE_S) -> GatewayServer:
    store = RecordStore(store_path)
    scenario = load_scenario(scenario_path) if scenario_path else None
    if scenario is not None:
        for patient in scenario.patients:
            store.save_patient(patient)
    app = GatewayApp(store, scenario=scenario, pace_s=pace_s)
    return GatewayServer(app, host=host, port=port, webroot=webroot)
