"""Operator command line.

    umphcs patient add --id p1 --name Asha --region dhaka
    umphcs measure temperature --patient p1 --true-temp-c 38.0
    umphcs measure blood_pressure --patient p1 --map 100 --sigma 15
    umphcs screen weight p1
    umphcs screen region dhaka
    umphcs sync run --endpoint 127.0.0.1:7040
    umphcs serve sync --port 7040
    umphcs serve gateway --port 7080 --webroot frontend/dist
    umphcs scenario run demo.json
    umphcs audiogram show r-000001

Every failure path prints exactly one machine-readable JSON line on
stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import os
import sys

from .. import biosim, sync
from ..diagnostics import HeightInput, TemperatureCalib, TwoPointCalib, height_from_pixels
from ..records import (
    Patient,
    RecordError,
    RecordStore,
    TestRecord,
    canon_dumps,
    canon_num,
    screen_region,
    screen_weight,
)
from ..wireproto import FaultProfile
from . import session as sess
from .advice import advise, load_rules
from .gateway import DEFAULT_PACE_S, build_gateway
from .scenario import ScenarioParseError, load_scenario, run_scenario

STORE_ENV = "UMPHCS_STORE"
DEFAULT_STORE = "umphcs-store.jsonl"


class CliError(RuntimeError):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code


def _parse_point(text: str) -> tuple[float, float]:
    x, _, y = text.partition(",")
    return (float(x), float(y))


def _parse_profile(text: str) -> biosim.HearingProfile:
    thresholds = {}
    for part in filter(None, text.split(",")):
        freq, _, db = part.partition(":")
        thresholds[float(freq)] = float(db)
    return biosim.HearingProfile(thresholds)


def _parse_calib_point(text: str) -> tuple[int, float]:
    code, _, value = text.partition(":")
    return (int(code), float(value))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umphcs")
    parser.add_argument("--store", default=None,
                        help=f"record store path (default ${STORE_ENV} or {DEFAULT_STORE})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_patient = sub.add_parser("patient", help="manage patients")
    patient_sub = p_patient.add_subparsers(dest="action", required=True)
    p_add = patient_sub.add_parser("add")
    p_add.add_argument("--id", required=True)
    p_add.add_argument("--name", required=True)
    p_add.add_argument("--region", required=True)
    p_add.add_argument("--created-at", default=None)
    patient_sub.add_parser("list")

    p_measure = sub.add_parser("measure", help="run one measurement")
    p_measure.add_argument("kind", choices=["temperature", "blood_pressure", "weight",
                                            "eye_power", "hearing", "height"])
    p_measure.add_argument("--patient", required=True)
    p_measure.add_argument("--transport", choices=["wired", "bluetooth"], default="wired")
    p_measure.add_argument("--seed", type=int, default=0)
    p_measure.add_argument("--drop-prob", type=float, default=0.0)
    p_measure.add_argument("--corrupt-prob", type=float, default=0.0)
    p_measure.add_argument("--latency-ms", type=float, default=2.0)
    p_measure.add_argument("--cutoff-engaged", action="store_true",
                           help="leave the safety cutoff on (refusal test)")
    p_measure.add_argument("--rules", default=None, help="suggestion rules JSON file")
    p_measure.add_argument("--true-temp-c", type=float)
    p_measure.add_argument("--offset-c", type=float, default=0.0)
    p_measure.add_argument("--map", type=float, dest="map_true")
    p_measure.add_argument("--sigma", type=float, default=15.0)
    p_measure.add_argument("--amp-max", type=float, default=3.0)
    p_measure.add_argument("--hr-hz", type=float, default=1.2)
    p_measure.add_argument("--noise-sd", type=float, default=0.0)
    p_measure.add_argument("--p-start", type=float, default=180.0)
    p_measure.add_argument("--deflation-rate", type=float, default=3.0)
    p_measure.add_argument("--true-weight-kg", type=float)
    p_measure.add_argument("--calib-lo", type=_parse_calib_point, default=None,
                           metavar="CODE:KG")
    p_measure.add_argument("--calib-hi", type=_parse_calib_point, default=None,
                           metavar="CODE:KG")
    p_measure.add_argument("--pot-code", type=int)
    p_measure.add_argument("--distance-m", type=float)
    p_measure.add_argument("--profile", type=str, default="",
                           help="hearing thresholds, e.g. 250:30,500:35")
    p_measure.add_argument("--ruler-top", type=_parse_point)
    p_measure.add_argument("--ruler-bottom", type=_parse_point)
    p_measure.add_argument("--head", type=_parse_point)
    p_measure.add_argument("--foot", type=_parse_point)
    p_measure.add_argument("--ruler-len", type=float)

    p_screen = sub.add_parser("screen", help="run screening rules")
    screen_sub = p_screen.add_subparsers(dest="what", required=True)
    s_weight = screen_sub.add_parser("weight")
    s_weight.add_argument("patient_id")
    s_region = screen_sub.add_parser("region")
    s_region.add_argument("region")

    p_sync = sub.add_parser("sync", help="talk to the central server")
    sync_sub = p_sync.add_subparsers(dest="action", required=True)
    s_run = sync_sub.add_parser("run")
    s_run.add_argument("--endpoint", default=None, help="host:port")

    p_serve = sub.add_parser("serve", help="run a server")
    serve_sub = p_serve.add_subparsers(dest="what", required=True)
    sv_sync = serve_sub.add_parser("sync")
    sv_sync.add_argument("--host", default="127.0.0.1")
    sv_sync.add_argument("--port", type=int, default=7040)
    sv_sync.add_argument("--server-store", default="umphcs-server.jsonl")
    sv_gw = serve_sub.add_parser("gateway")
    sv_gw.add_argument("--host", default="127.0.0.1")
    sv_gw.add_argument("--port", type=int, default=7080)
    sv_gw.add_argument("--webroot", default=None)
    sv_gw.add_argument("--scenario", default=None)
    sv_gw.add_argument("--pace-ms", type=float, default=DEFAULT_PACE_S * 1000.0)

    p_scenario = sub.add_parser("scenario", help="run a scripted session")
    scenario_sub = p_scenario.add_subparsers(dest="action", required=True)
    sc_run = scenario_sub.add_parser("run")
    sc_run.add_argument("file")
    sc_run.add_argument("--report", default=None, help="also write the report here")

    p_audio = sub.add_parser("audiogram", help="inspect hearing records")
    audio_sub = p_audio.add_subparsers(dest="action", required=True)
    a_show = audio_sub.add_parser("show")
    a_show.add_argument("record_id")

    return parser


def _store_path(args) -> str:
    return args.store or os.environ.get(STORE_ENV) or DEFAULT_STORE


def _open_store(args) -> RecordStore:
    return RecordStore(_store_path(args))


def _hub_session(args) -> sess.HubSession:
    fault = None
    if args.transport == "bluetooth":
        fault = FaultProfile(drop_prob=args.drop_prob, corrupt_prob=args.corrupt_prob,
                             seed=args.seed, latency_ms=args.latency_ms)
    return sess.HubSession(args.transport, fault)


def _require(args, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise CliError("missing-argument", f"{args.kind} needs {flags}")


def cmd_measure(args) -> int:
    store = _open_store(args)
    store.get_patient(args.patient)
    clock = sess.SessionClock()
    hub = _hub_session(args)

    if args.kind == "temperature":
        _require(args, ["true_temp_c"])
        if args.cutoff_engaged:
            hub.attach(biosim.TemperatureModule(args.true_temp_c))
            hub.engage_cutoff()
            hub.exchange()  # raises HubRefused
        payload = sess.measure_temperature(hub, args.true_temp_c,
                                           TemperatureCalib(offset_c=args.offset_c))
    elif args.kind == "blood_pressure":
        _require(args, ["map_true"])
        params = biosim.CuffRunParams(map_true=args.map_true, amp_max=args.amp_max,
                                      sigma=args.sigma, heart_rate_hz=args.hr_hz,
                                      p_start=args.p_start,
                                      deflation_rate=args.deflation_rate,
                                      noise_sd=args.noise_sd, seed=args.seed)
        if args.cutoff_engaged:
            hub.attach(biosim.CuffModule(params))
            hub.engage_cutoff()
            hub.exchange()  # raises HubRefused
        payload = sess.measure_blood_pressure(hub, params).payload
    elif args.kind == "weight":
        _require(args, ["true_weight_kg"])
        calib = sess.DEFAULT_WEIGHT_CALIB
        if args.calib_lo and args.calib_hi:
            calib = TwoPointCalib(code_lo=args.calib_lo[0], value_lo=args.calib_lo[1],
                                  code_hi=args.calib_hi[0], value_hi=args.calib_hi[1])
        payload = sess.measure_weight(hub, args.true_weight_kg, calib)
    elif args.kind == "eye_power":
        if args.pot_code is None and args.distance_m is None:
            raise CliError("missing-argument", "eye_power needs --pot-code or --distance-m")
        payload = sess.measure_eye_power(hub, pot_code=args.pot_code,
                                         distance_m=args.distance_m)
    elif args.kind == "hearing":
        payload = sess.measure_hearing(_parse_profile(args.profile)).payload
    else:  # height
        _require(args, ["ruler_top", "ruler_bottom", "head", "foot", "ruler_len"])
        inp = HeightInput(ruler_top=args.ruler_top, ruler_bottom=args.ruler_bottom,
                          head=args.head, foot=args.foot, ruler_len=args.ruler_len)
        payload = {"meters": height_from_pixels(inp)}

    record = TestRecord(record_id=store.next_record_id(), patient_id=args.patient,
                        kind=args.kind, payload=payload, taken_at=clock.now())
    store.save_record(record)
    print(canon_dumps({"record_id": record.record_id, "kind": args.kind,
                       "patient_id": args.patient, "payload": record.payload}))
    rules = load_rules(args.rules) if args.rules else None
    for suggestion in advise(args.kind, record.payload, rules):
        print(f"suggestion: {suggestion}")
    return 0


def cmd_patient(args) -> int:
    store = _open_store(args)
    if args.action == "add":
        patient = Patient(patient_id=args.id, name=args.name, region=args.region,
                          created_at=args.created_at or sess.SessionClock().now())
        store.save_patient(patient)
        print(canon_dumps({"patient_id": patient.patient_id}))
    else:
        for p in store.patients():
            print(p.canonical_line())
    return 0


def cmd_screen(args) -> int:
    store = _open_store(args)
    if args.what == "weight":
        flag = screen_weight(store.history(args.patient_id, "weight"))
        if flag is None:
            print("none")
        else:
            print(canon_dumps({"rule": flag.rule, "patient_id": flag.patient_id,
                               "severity": flag.severity,
                               "evidence": list(flag.evidence)}))
    else:
        alert = screen_region(store, args.region)
        print("none" if alert is None else canon_dumps(alert.to_payload()))
    return 0


def cmd_sync(args) -> int:
    store = _open_store(args)
    summary = sync.client_sync(store, endpoint=args.endpoint)
    print(canon_dumps(summary))
    return 0


def cmd_serve(args) -> int:
    if args.what == "sync":
        server = sync.SyncServer(sync.ServerStore(args.server_store),
                                 host=args.host, port=args.port)
        print(f"sync server on {server.endpoint}", flush=True)
        server.serve_forever()
    else:
        server = build_gateway(_store_path(args), host=args.host, port=args.port,
                               webroot=args.webroot, scenario_path=args.scenario,
                               pace_s=args.pace_ms / 1000.0)
        print(f"gateway on {server.endpoint}", flush=True)
        server.serve_forever()
    return 0


def cmd_scenario(args) -> int:
    store = _open_store(args)
    report = run_scenario(load_scenario(args.file), store)
    sys.stdout.write(report.text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.text)
    return 0 if report.ok else 1


def cmd_audiogram(args) -> int:
    store = _open_store(args)
    record = next((r for r in store.all_records()
                   if r.record_id == args.record_id), None)
    if record is None or record.kind != "hearing":
        raise CliError("no-such-record", f"{args.record_id} is not a hearing record")
    gram = record.payload["audiogram"]
    print(f"audiogram {record.record_id} patient {record.patient_id} ({record.taken_at})")
    print("  freq Hz  dB HL")
    for freq in sorted(gram, key=int):
        level = gram[freq]
        if level is None:
            print(f"  {freq:>7}     NR")
        else:
            bar = "#" * max(0, int((level + 5) // 5))
            print(f"  {freq:>7}  {canon_num(level):>5}  {bar}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "patient": cmd_patient,
        "measure": cmd_measure,
        "screen": cmd_screen,
        "sync": cmd_sync,
        "serve": cmd_serve,
        "scenario": cmd_scenario,
        "audiogram": cmd_audiogram,
    }
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(canon_dumps({"error": exc.code, "detail": str(exc)}), file=sys.stderr)
        return 2
    except sess.MeasurementError as exc:
        print(canon_dumps({"error": exc.code, "detail": str(exc)}), file=sys.stderr)
        return 3
    except ScenarioParseError as exc:
        print(canon_dumps({"error": "scenario-parse", "detail": str(exc)}), file=sys.stderr)
        return 2
    except sync.VersionMismatch as exc:
        print(canon_dumps({"error": "version-mismatch", "detail": str(exc)}), file=sys.stderr)
        return 4
    except sync.SyncConnectionLost as exc:
        print(canon_dumps({"error": "connection-lost", "detail": str(exc),
                           "uploaded": exc.uploaded}), file=sys.stderr)
        return 4
    except sync.SyncError as exc:
        print(canon_dumps({"error": "sync-failed", "detail": str(exc)}), file=sys.stderr)
        return 4
    except RecordError as exc:
        print(canon_dumps({"error": "record-error", "detail": str(exc)}), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(canon_dumps({"error": "bad-value", "detail": str(exc)}), file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
