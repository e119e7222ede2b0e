"""Hub wire protocol: single-byte commands, line-framed responses.

Request: one byte, 'S' (sample raw channel) or 'F' (sample filtered channel).
Response: ASCII decimal digits terminated by LF ("512\n"), or the literal
refusal frame "ERR\n". No padding, no sign, no checksum. Values are 10-bit
ADC codes, so anything above 1023 is malformed by definition.

The decoder is incremental and bounded: it never buffers more than 8 bytes
of an unterminated frame, and after a malformed frame it resynchronizes on
the next LF.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

ADC_MAX_CODE = 1023
MAX_FRAME_BYTES = 8  # longest legal body is "1023" (4); 8 without LF is garbage

ERROR_FRAME = b"ERR"
TERMINATOR = 0x0A


class HubCommand(Enum):
    SAMPLE_RAW = 0x53       # 'S'
    SAMPLE_FILTERED = 0x46  # 'F'


@dataclass(frozen=True)
class AdcValue:
    code: int

    def __post_init__(self):
        if not 0 <= self.code <= ADC_MAX_CODE:
            raise ValueError(f"ADC code {self.code} outside [0, {ADC_MAX_CODE}]")


@dataclass(frozen=True)
class HubError:
    pass


HubResponse = AdcValue | HubError


def encode_command(cmd: HubCommand) -> bytes:
    """Encode a command as its single wire byte."""
    return bytes([cmd.value])


def decode_command(byte: int) -> HubCommand | None:
    """Map a received byte to a command, or None for bytes the hub ignores."""
    for cmd in HubCommand:
        if cmd.value == byte:
            return cmd
    return None


def encode_response(resp: HubResponse) -> bytes:
    """Encode a response as one LF-terminated frame."""
    if isinstance(resp, AdcValue):
        return b"%d\n" % resp.code
    return ERROR_FRAME + b"\n"


@dataclass(frozen=True)
class Complete:
    response: HubResponse
    consumed: int  # total frame bytes including terminator, across feeds


@dataclass(frozen=True)
class NeedMore:
    pass


@dataclass(frozen=True)
class Malformed:
    reason: str


DecodeOutcome = Complete | NeedMore | Malformed


@dataclass
class DecoderState:
    """Incremental parser state. `pending` holds unconsumed stream bytes;
    `skipping` means we are discarding a malformed frame up to its LF."""

    pending: bytearray = field(default_factory=bytearray)
    skipping: bool = False


def decode_response(data: bytes, state: DecoderState) -> DecodeOutcome:
    """Feed `data` into the parser and try to take one frame off the front.

    Returns Complete with the decoded response and the full frame length,
    NeedMore if no complete frame is buffered yet, or Malformed (the bad
    frame's bytes are discarded; following bytes up to the next LF are
    skipped so the stream can resynchronize). Call again with b"" to drain
    further frames already in `state`.
    """
    state.pending.extend(data)

    if state.skipping:
        nl = state.pending.find(TERMINATOR)
        if nl < 0:
            state.pending.clear()
            return NeedMore()
        del state.pending[: nl + 1]
        state.skipping = False

    nl = state.pending.find(TERMINATOR)
    if nl < 0:
        if len(state.pending) > MAX_FRAME_BYTES:
            state.pending.clear()
            state.skipping = True
            return Malformed("frame exceeds 8 bytes without terminator")
        return NeedMore()

    frame = bytes(state.pending[:nl])
    del state.pending[: nl + 1]

    if frame == ERROR_FRAME:
        return Complete(HubError(), nl + 1)
    if not frame or not frame.isdigit():
        return Malformed("non-digit byte inside numeric frame")
    value = int(frame)
    if value > ADC_MAX_CODE:
        return Malformed(f"value {value} out of ADC range")
    return Complete(AdcValue(value), nl + 1)


@dataclass(frozen=True)
class FaultProfile:
    """Per-byte fault model for a lossy link. Same seed, same fault sequence."""

    drop_prob: float = 0.0
    corrupt_prob: float = 0.0
    seed: int = 0
    latency_ms: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ValueError("drop_prob must be in [0, 1]")
        if not 0.0 <= self.corrupt_prob <= 1.0:
            raise ValueError("corrupt_prob must be in [0, 1]")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be nonnegative")


class FaultInjector:
    """Stateful byte mangler for one link direction."""

    def __init__(self, profile: FaultProfile, stream_id: int = 0):
        self.profile = profile
        self._rng = random.Random(profile.seed * 0x9E3779B1 + stream_id)

    def apply(self, data: bytes) -> bytes:
        out = bytearray()
        for b in data:
            if self._rng.random() < self.profile.drop_prob:
                continue
            if self._rng.random() < self.profile.corrupt_prob:
                b ^= self._rng.randrange(1, 256)
            out.append(b)
        return bytes(out)


def apply_faults(profile: FaultProfile, data: bytes) -> bytes:
    """One-shot fault application; deterministic for a fixed profile seed."""
    return FaultInjector(profile).apply(data)


class Endpoint:
    """One side of a duplex link. Owned by a single session; not thread safe."""

    def __init__(self, link: "Link", inbox: list, peer_injector: FaultInjector | None):
        self._link = link
        self._inbox = inbox  # list of (ready_at_ms, bytes) this side will read
        self._out_injector = peer_injector
        self._peer_inbox: list | None = None

    def _connect(self, peer_inbox: list) -> None:
        self._peer_inbox = peer_inbox

    def write(self, data: bytes) -> None:
        if self._out_injector is not None:
            data = self._out_injector.apply(data)
        if data:
            self._peer_inbox.append((self._link.now_ms + self._link.latency_ms, data))

    def read(self) -> bytes:
        """All bytes whose delivery time has passed, in write order."""
        out = bytearray()
        while self._inbox and self._inbox[0][0] <= self._link.now_ms:
            out.extend(self._inbox.pop(0)[1])
        return bytes(out)


class Link:
    """In-memory duplex byte link with a session-driven virtual clock.

    kind="wired": zero latency, lossless. kind="bluetooth": configurable
    latency and an optional FaultProfile applied independently per direction.
    Delivered bytes always arrive in write order; faults drop or corrupt,
    never reorder.
    """

    def __init__(self, kind: str = "wired", fault: FaultProfile | None = None):
        if kind not in ("wired", "bluetooth"):
            raise ValueError(f"unknown transport kind {kind!r}")
        self.kind = kind
        self.now_ms = 0.0
        if kind == "wired":
            self.latency_ms = 0.0
            host_inj = hub_inj = None
        else:
            fault = fault or FaultProfile(latency_ms=2.0)
            self.latency_ms = fault.latency_ms
            host_inj = FaultInjector(fault, stream_id=1)  # host -> hub
            hub_inj = FaultInjector(fault, stream_id=2)   # hub -> host
        host_inbox: list = []
        hub_inbox: list = []
        self.host = Endpoint(self, host_inbox, host_inj)
        self.hub = Endpoint(self, hub_inbox, hub_inj)
        self.host._connect(hub_inbox)
        self.hub._connect(host_inbox)

    def advance(self, ms: float) -> None:
        if ms < 0:
            raise ValueError("clock only moves forward")
        self.now_ms += ms
