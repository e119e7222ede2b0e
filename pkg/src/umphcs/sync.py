"""Upload client and central server for the shared record database.

Line protocol over a reliable ordered byte stream (UTF-8, LF-terminated):

    client                      server
    HELLO v1                    OK v1
    PUT <canonical-line>        OK <id>            (idempotent per bytes)
    LIST <patient_id>           BEGIN / lines / END
    FLAGS <region>              ALERT <json> | NONE
    QUIT                        BYE
    anything else               ERR <reason>

The server stores uploaded lines verbatim, so LIST echoes byte-identical
canonical lines. Re-PUT of identical bytes is a no-op; different bytes
under the same id follow last-writer-wins, with a supersede marker kept
in the server log for audit.
"""

from __future__ import annotations

import os
import socket
import socketserver
import threading
from dataclasses import dataclass

from . import records
from .records import Patient, RecordStore, TestRecord, canon_dumps, parse_line, screen_region

PROTOCOL_VERSION = "v1"
ENDPOINT_ENV = "UMPHCS_SYNC_ENDPOINT"


class SyncError(RuntimeError):
    pass


class VersionMismatch(SyncError):
    pass


class SyncProtocolError(SyncError):
    pass


class SyncConnectionLost(SyncError):
    def __init__(self, message: str, uploaded: int = 0):
        super().__init__(message)
        self.uploaded = uploaded


class ServerStore:
    """Canonical lines keyed by record id (patients keyed by patient id),
    plus the indexes needed for LIST and FLAGS. Thread safe."""

    def __init__(self, path: str | None = None):
        self.path = path
        self._lock = threading.RLock()
        self._lines: dict[str, str] = {}
        self._patients: dict[str, Patient] = {}
        self._records: dict[str, TestRecord] = {}
        self._arrival: dict[str, int] = {}
        self._counter = 0
        self._fh = None
        if path is not None:
            self._load()
            self._fh = open(path, "a", encoding="utf-8")

    def _load(self) -> None:
        if not os.path.exists(self.path):
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line:
                    continue
                obj = parse_line(line)
                if isinstance(obj, dict):  # supersede markers: superseded by replay order
                    continue
                self._store(line, obj)

    def _append(self, line: str) -> None:
        if self._fh is not None:
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def _key(self, obj: Patient | TestRecord) -> str:
        if isinstance(obj, Patient):
            return f"patient:{obj.patient_id}"
        return obj.record_id

    def _store(self, line: str, obj: Patient | TestRecord) -> str:
        key = self._key(obj)
        if isinstance(obj, Patient):
            self._patients[obj.patient_id] = obj
        else:
            self._records[obj.record_id] = obj
            if key not in self._arrival:
                self._arrival[key] = self._counter
                self._counter += 1
        self._lines[key] = line
        return obj.patient_id if isinstance(obj, Patient) else obj.record_id

    def put_line(self, line: str) -> str:
        """Store one uploaded canonical line; returns the record id."""
        obj = parse_line(line)
        if isinstance(obj, dict):
            raise records.RecordError("marker lines cannot be uploaded")
        with self._lock:
            key = self._key(obj)
            old = self._lines.get(key)
            if old == line:
                return obj.patient_id if isinstance(obj, Patient) else obj.record_id
            if old is not None:
                self._append(canon_dumps({"kind": "supersede", "ref": key}))
            self._append(line)
            return self._store(line, obj)

    def list_lines(self, patient_id: str) -> list[str]:
        """That patient's record lines, ascending taken_at, verbatim."""
        with self._lock:
            recs = [r for r in self._records.values() if r.patient_id == patient_id]
            recs.sort(key=lambda r: (r.taken_at, self._arrival[r.record_id]))
            return [self._lines[r.record_id] for r in recs]

    # records.screen_region duck-types over these two:
    def patients(self) -> list[Patient]:
        with self._lock:
            return list(self._patients.values())

    def history(self, patient_id: str, kind: str | None = None) -> list[TestRecord]:
        with self._lock:
            recs = [r for r in self._records.values() if r.patient_id == patient_id]
            if kind is not None:
                recs = [r for r in recs if r.kind == kind]
            recs.sort(key=lambda r: (r.taken_at, self._arrival[r.record_id]))
            return recs

    def flags(self, region: str) -> records.RegionAlert | None:
        with self._lock:
            return screen_region(self, region)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


@dataclass
class SyncSession:
    hello_seen: bool = False


def server_handle(store: ServerStore, line: str, session: SyncSession) -> list[str]:
    """One request line to one reply unit (a list of reply lines)."""
    line = line.rstrip("\r\n")
    if not line:
        return ["ERR malformed-line"]
    verb, _, rest = line.partition(" ")
    if verb == "HELLO":
        if rest != PROTOCOL_VERSION:
            return ["ERR version-mismatch"]
        session.hello_seen = True
        return [f"OK {PROTOCOL_VERSION}"]
    if not session.hello_seen:
        return ["ERR before-hello"]
    if verb == "PUT":
        try:
            rid = store.put_line(rest)
        except (ValueError, KeyError):
            return ["ERR malformed-line"]
        return [f"OK {rid}"]
    if verb == "LIST":
        if not rest:
            return ["ERR malformed-line"]
        return ["BEGIN", *store.list_lines(rest), "END"]
    if verb == "FLAGS":
        if not rest:
            return ["ERR malformed-line"]
        alert = store.flags(rest)
        if alert is None:
            return ["NONE"]
        return ["ALERT " + canon_dumps(alert.to_payload())]
    if verb == "QUIT":
        return ["BYE"]
    return ["ERR unknown-verb"]


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        session = SyncSession()
        while True:
            raw = self.rfile.readline()
            if not raw:
                return
            line = raw.decode("utf-8")
            replies = server_handle(self.server.store, line, session)
            for reply in replies:
                self.wfile.write(reply.encode("utf-8") + b"\n")
            self.wfile.flush()
            if replies == ["BYE"]:
                return


class SyncServer(socketserver.ThreadingTCPServer):
    """Accepts concurrent sessions; store mutations are serialized inside
    ServerStore, so each LIST sees a consistent snapshot."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, store: ServerStore, host: str = "127.0.0.1", port: int = 0):
        self.store = store
        super().__init__((host, port), _Handler)

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class LineConnection:
    """Blocking line-oriented client connection."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._rfile = sock.makefile("rb")

    def send(self, line: str) -> None:
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise SyncConnectionLost(f"send failed: {exc}") from exc

    def recv(self) -> str:
        try:
            raw = self._rfile.readline()
        except OSError as exc:
            raise SyncConnectionLost(f"recv failed: {exc}") from exc
        if not raw:
            raise SyncConnectionLost("server closed the connection")
        return raw.decode("utf-8").rstrip("\n")

    def close(self) -> None:
        try:
            self._rfile.close()
            self._sock.close()
        except OSError:
            pass


def connect(endpoint: str) -> LineConnection:
    host, _, port = endpoint.rpartition(":")
    try:
        return LineConnection(socket.create_connection((host or "127.0.0.1", int(port))))
    except OSError as exc:
        raise SyncConnectionLost(f"cannot reach {endpoint}: {exc}") from exc


def resolve_endpoint(endpoint: str | None) -> str:
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise SyncError(f"no sync endpoint; pass one or set {ENDPOINT_ENV}")
    return endpoint


def client_sync(store: RecordStore, endpoint: str | None = None,
                conn: LineConnection | None = None) -> dict:
    """Upload every unsynced record in taken_at order; mark each synced as
    soon as the server acknowledges it, so an interrupted run resumes with
    no duplicates. Patient lines ride along for whichever patients the
    pending records reference (idempotent server-side).

    Returns {"uploaded": n, "skipped": m} where skipped counts records
    that were already synced.
    """
    own_conn = conn is None
    if own_conn:
        conn = connect(resolve_endpoint(endpoint))
    uploaded = 0
    try:
        conn.send(f"HELLO {PROTOCOL_VERSION}")
        reply = conn.recv()
        if reply != f"OK {PROTOCOL_VERSION}":
            raise VersionMismatch(f"server said {reply!r}")
        pending = store.unsynced()
        skipped = len(store.all_records()) - len(pending)
        for pid in sorted({r.patient_id for r in pending}):
            conn.send("PUT " + store.get_patient(pid).canonical_line())
            reply = conn.recv()
            if not reply.startswith("OK "):
                raise SyncProtocolError(f"patient upload refused: {reply!r}")
        for record in pending:
            conn.send("PUT " + record.canonical_line())
            reply = conn.recv()
            if reply != f"OK {record.record_id}":
                raise SyncProtocolError(f"upload refused: {reply!r}")
            store.mark_synced(record.record_id)
            uploaded += 1
        conn.send("QUIT")
        conn.recv()  # BYE
        return {"uploaded": uploaded, "skipped": skipped}
    except SyncConnectionLost as exc:
        exc.uploaded = uploaded
        raise
    finally:
        if own_conn:
            conn.close()
