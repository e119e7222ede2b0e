"""Patient and test-record store: append-only canonical-line log.

One record per line, UTF-8, LF-terminated. Each line is a JSON object in
canonical form: fixed field order (kind tag, ids, timestamp, payload),
numbers rendered with up to six decimals and no trailing zeros, no
intra-line whitespace. Canonical form is bit-exact, so the same record
always serializes to the same bytes; sync and the server echo these lines
verbatim.

The log is never rewritten. Sync state is recorded as separate marker
lines ({"kind":"synced","ref":...}) so record lines stay immutable. On
reload, a truncated final line (torn write) is discarded with a warning.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone

logger = logging.getLogger(__name__)

TEST_KINDS = ("temperature", "blood_pressure", "weight", "eye_power", "hearing", "height")

PAYLOAD_FIELDS = {
    "temperature": ("celsius",),
    "blood_pressure": ("systolic", "diastolic", "map", "heart_rate"),
    "weight": ("kg",),
    "eye_power": ("diopters", "distance_m"),
    "hearing": ("audiogram",),
    "height": ("meters",),
}

WEIGHT_DECLINE_MIN_RUN = 3
WEIGHT_DECLINE_MIN_DROP = 0.05
REGION_ALERT_FRACTION = 0.20


class RecordError(ValueError):
    pass


class UnknownPatient(RecordError):
    pass


class DuplicateRecordId(RecordError):
    pass


class StorageFailure(RuntimeError):
    pass


def canon_num(x: float | int) -> str:
    """Canonical number text: up to 6 decimals, no trailing zeros."""
    if isinstance(x, bool):
        raise TypeError("bool is not a number here")
    if isinstance(x, int):
        return str(x)
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite number has no canonical form")
    text = f"{x:.6f}".rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def canon_dumps(obj) -> str:
    """Serialize to canonical single-line JSON. Dict order is preserved,
    so callers fix the field order by construction."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (int, float)):
        return canon_num(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canon_dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}:{canon_dumps(v)}"
                 for k, v in obj.items())
        return "{" + ",".join(items) + "}"
    raise TypeError(f"no canonical form for {type(obj).__name__}")


def canon_timestamp(ts: datetime | str) -> str:
    """UTC, whole seconds, trailing Z."""
    if isinstance(ts, str):
        ts = datetime.fromisoformat(ts.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Patient:
    patient_id: str
    name: str
    region: str
    created_at: str = "1970-01-01T00:00:00Z"

    def __post_init__(self):
        if not self.patient_id:
            raise RecordError("patient_id must be non-empty")
        if not self.region:
            raise RecordError("region must be non-empty")
        object.__setattr__(self, "created_at", canon_timestamp(self.created_at))

    def canonical_line(self) -> str:
        return canon_dumps({
            "kind": "patient",
            "patient_id": self.patient_id,
            "name": self.name,
            "region": self.region,
            "created_at": self.created_at,
        })


def _canon_payload(kind: str, payload: dict) -> dict:
    fields = PAYLOAD_FIELDS[kind]
    missing = [f for f in fields if f not in payload]
    if missing:
        raise RecordError(f"{kind} payload missing {missing}")
    out = {}
    for f in fields:
        v = payload[f]
        if f == "audiogram":
            if not isinstance(v, dict):
                raise RecordError("audiogram payload must be a map")
            v = {str(int(k)): (None if v[k] is None else v[k])
                 for k in sorted(v, key=lambda s: int(s))}
        out[f] = v
    return out


@dataclass(frozen=True)
class TestRecord:
    record_id: str
    patient_id: str
    kind: str
    payload: dict
    taken_at: str
    device_id: str = "emu-0"
    synced: bool = False

    def __post_init__(self):
        if self.kind not in TEST_KINDS:
            raise RecordError(f"unknown test kind {self.kind!r}")
        object.__setattr__(self, "payload", _canon_payload(self.kind, self.payload))
        object.__setattr__(self, "taken_at", canon_timestamp(self.taken_at))

    def canonical_line(self) -> str:
        return canon_dumps({
            "kind": self.kind,
            "record_id": self.record_id,
            "patient_id": self.patient_id,
            "device_id": self.device_id,
            "taken_at": self.taken_at,
            "payload": self.payload,
        })


def parse_line(line: str) -> Patient | TestRecord | dict:
    """Parse one store line back into a record object (markers come back
    as plain dicts)."""
    obj = json.loads(line)
    kind = obj.get("kind")
    if kind == "patient":
        return Patient(patient_id=obj["patient_id"], name=obj["name"],
                       region=obj["region"], created_at=obj["created_at"])
    if kind in TEST_KINDS:
        return TestRecord(record_id=obj["record_id"], patient_id=obj["patient_id"],
                          kind=kind, payload=obj["payload"], taken_at=obj["taken_at"],
                          device_id=obj["device_id"])
    return obj


class RecordStore:
    """Single-writer append-only store with an in-memory index."""

    def __init__(self, path: str):
        self.path = path
        self._patients: dict[str, Patient] = {}
        self._records: dict[str, TestRecord] = {}
        self._order: list[str] = []  # record ids in append order
        self._synced: set[str] = set()
        self._load()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _load(self) -> None:
        if not os.path.exists(self.path):
            return
        with open(self.path, "rb") as fh:
            raw = fh.read()
        if not raw:
            return
        lines = raw.split(b"\n")
        tail = lines.pop()  # b"" when the file ends with a newline
        if tail:
            logger.warning("discarding truncated final line (%d bytes) in %s",
                           len(tail), self.path)
        for i, line in enumerate(lines):
            try:
                obj = parse_line(line.decode("utf-8"))
            except (ValueError, KeyError) as exc:
                raise StorageFailure(f"{self.path}:{i + 1}: unreadable record: {exc}")
            if isinstance(obj, Patient):
                self._patients[obj.patient_id] = obj
            elif isinstance(obj, TestRecord):
                self._records[obj.record_id] = obj
                self._order.append(obj.record_id)
            elif obj.get("kind") == "synced":
                self._synced.add(obj["ref"])
            else:
                raise StorageFailure(f"{self.path}:{i + 1}: unknown line kind")

    def _append(self, line: str) -> None:
        self._fh.write(line + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    def save_patient(self, patient: Patient) -> str:
        existing = self._patients.get(patient.patient_id)
        if existing is not None:
            if existing.canonical_line() != patient.canonical_line():
                raise DuplicateRecordId(f"patient {patient.patient_id} already stored "
                                        "with different content")
            return patient.patient_id
        self._append(patient.canonical_line())
        self._patients[patient.patient_id] = patient
        return patient.patient_id

    def save_record(self, record: TestRecord) -> str:
        if record.patient_id not in self._patients:
            raise UnknownPatient(f"no patient {record.patient_id!r} in store")
        existing = self._records.get(record.record_id)
        if existing is not None:
            if existing.canonical_line() != record.canonical_line():
                raise DuplicateRecordId(f"record {record.record_id} already stored "
                                        "with different content")
            return record.record_id
        self._append(record.canonical_line())
        self._records[record.record_id] = record
        self._order.append(record.record_id)
        return record.record_id

    def mark_synced(self, record_id: str) -> None:
        if record_id not in self._records:
            raise RecordError(f"no record {record_id!r} to mark synced")
        if record_id in self._synced:
            return
        self._append(canon_dumps({"kind": "synced", "ref": record_id}))
        self._synced.add(record_id)

    def is_synced(self, record_id: str) -> bool:
        return record_id in self._synced

    def next_record_id(self) -> str:
        n = len(self._records) + 1
        while f"r-{n:06d}" in self._records:
            n += 1
        return f"r-{n:06d}"

    def patients(self) -> list[Patient]:
        return list(self._patients.values())

    def get_patient(self, patient_id: str) -> Patient:
        try:
            return self._patients[patient_id]
        except KeyError:
            raise UnknownPatient(f"no patient {patient_id!r} in store") from None

    def history(self, patient_id: str, kind: str | None = None) -> list[TestRecord]:
        """Records for one patient, ascending taken_at (stable for ties)."""
        self.get_patient(patient_id)
        out = [self._records[rid] for rid in self._order
               if self._records[rid].patient_id == patient_id]
        if kind is not None:
            out = [r for r in out if r.kind == kind]
        return sorted(out, key=lambda r: r.taken_at)

    def unsynced(self) -> list[TestRecord]:
        out = [self._records[rid] for rid in self._order if rid not in self._synced]
        return sorted(out, key=lambda r: r.taken_at)

    def all_records(self) -> list[TestRecord]:
        return [self._records[rid] for rid in self._order]


def save(store: RecordStore, record: Patient | TestRecord) -> str:
    if isinstance(record, Patient):
        return store.save_patient(record)
    return store.save_record(record)


def history(store: RecordStore, patient_id: str, kind: str | None = None) -> list[TestRecord]:
    return store.history(patient_id, kind)


@dataclass(frozen=True)
class TrendFlag:
    patient_id: str
    rule: str
    evidence: tuple[str, ...]  # record ids, oldest first
    severity: float            # fraction of weight lost over the run

    def __post_init__(self):
        if len(self.evidence) < WEIGHT_DECLINE_MIN_RUN:
            raise ValueError("a trend flag needs at least three records of evidence")


def screen_weight(weight_history: list[TestRecord],
                  min_run: int = WEIGHT_DECLINE_MIN_RUN,
                  min_drop: float = WEIGHT_DECLINE_MIN_DROP) -> TrendFlag | None:
    """Flag a strictly decreasing run of the most recent weights whose
    total relative drop reaches the threshold."""
    usable = [r for r in weight_history if r.kind == "weight"]
    if len(usable) < min_run:
        return None
    start = len(usable) - 1
    while start > 0 and usable[start - 1].payload["kg"] > usable[start].payload["kg"]:
        start -= 1
    run = usable[start:]
    if len(run) < min_run:
        return None
    first = run[0].payload["kg"]
    last = run[-1].payload["kg"]
    if first <= 0:
        return None
    severity = (first - last) / first
    if severity < min_drop:
        return None
    return TrendFlag(patient_id=run[0].patient_id, rule="WeightDecline",
                     evidence=tuple(r.record_id for r in run), severity=severity)


@dataclass(frozen=True)
class RegionAlert:
    region: str
    eligible: int   # patients with enough weight history to screen
    flagged: int
    fraction: float
    flagged_patients: tuple[str, ...]

    def to_payload(self) -> dict:
        return {
            "region": self.region,
            "eligible": self.eligible,
            "flagged": self.flagged,
            "fraction": self.fraction,
            "flagged_patients": list(self.flagged_patients),
        }


def screen_region(store: RecordStore, region: str,
                  min_records: int = WEIGHT_DECLINE_MIN_RUN,
                  threshold: float = REGION_ALERT_FRACTION) -> RegionAlert | None:
    """Alert when the flagged fraction among screenable patients in a
    region reaches the threshold (inclusive)."""
    eligible = 0
    flagged: list[str] = []
    for patient in store.patients():
        if patient.region != region:
            continue
        weights = store.history(patient.patient_id, "weight")
        if len(weights) < min_records:
            continue
        eligible += 1
        if screen_weight(weights) is not None:
            flagged.append(patient.patient_id)
    if eligible == 0:
        return None
    fraction = len(flagged) / eligible
    if fraction < threshold:
        return None
    return RegionAlert(region=region, eligible=eligible, flagged=len(flagged),
                       fraction=fraction, flagged_patients=tuple(sorted(flagged)))
