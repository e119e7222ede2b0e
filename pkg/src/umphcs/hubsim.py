"""Sensor hub emulator.

The hub waits for a command byte, takes one ADC sample from the attached
sensor module, and answers with one frame. It has no idea which sensor it
is attached to; all interpretation happens host-side. A safety cutoff
blocks sampling while modules are being swapped, and every refusal is an
explicit "ERR" frame on the wire, never silence.

The hub clock is milliseconds of session time, driven by whoever owns the
session (never wall time), so runs are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from .wireproto import (
    AdcValue,
    Endpoint,
    HubCommand,
    HubError,
    HubResponse,
    decode_command,
    encode_response,
)

RAW = "raw"
FILTERED = "filtered"


class HubConfigError(Exception):
    pass


class AttachWhileLive(HubConfigError):
    """Module attached without engaging the safety cutoff first."""


class VirtualModule(Protocol):
    """Anything that produces a finite sensor voltage on demand."""

    has_filtered: bool

    def voltage(self, channel: str, clock_ms: float) -> float: ...


@dataclass(frozen=True)
class AdcModel:
    resolution_bits: int = 10
    vref: float = 5.0

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ValueError("resolution_bits must be >= 1")
        if self.vref <= 0:
            raise ValueError("vref must be positive")

    @property
    def max_code(self) -> int:
        return (1 << self.resolution_bits) - 1

    @property
    def lsb_volts(self) -> float:
        return self.vref / (1 << self.resolution_bits)


def quantize(model: AdcModel, v: float) -> int:
    """floor(v * 2^bits / vref), clamped to the code range.

    Floor plus clamp matches successive-approximation truncation and keeps
    the transfer monotone; negative inputs clamp to 0.
    """
    if not math.isfinite(v):
        raise ValueError("voltage must be finite")
    code = math.floor(v * (1 << model.resolution_bits) / model.vref)
    return min(max(code, 0), model.max_code)


@dataclass
class HubState:
    attached: VirtualModule | None = None
    safety_enabled: bool = True
    clock: float = 0.0  # ms since session start

    @property
    def has_filter_channel(self) -> bool:
        return self.attached is not None and self.attached.has_filtered


def serve(state: HubState, cmd: HubCommand, model: AdcModel) -> HubResponse:
    """Answer one command. Cutoff engaged, missing module, or a filtered
    request without a filter channel all refuse with HubError."""
    if not state.safety_enabled:
        return HubError()
    if state.attached is None:
        return HubError()
    if cmd is HubCommand.SAMPLE_FILTERED and not state.has_filter_channel:
        return HubError()
    channel = FILTERED if cmd is HubCommand.SAMPLE_FILTERED else RAW
    v = state.attached.voltage(channel, state.clock)
    return AdcValue(quantize(model, v))


def configure(state: HubState, action: str, module: VirtualModule | None = None) -> HubState:
    """Apply an operator action: attach, detach, safety_on, safety_off.

    Modules are swapped only under cutoff; attaching live raises
    AttachWhileLive (the hot-plug short-circuit hazard).
    """
    if action == "attach":
        if module is None:
            raise HubConfigError("attach requires a module")
        if state.safety_enabled:
            raise AttachWhileLive("engage the safety cutoff before changing modules")
        state.attached = module
    elif action == "detach":
        state.attached = None
    elif action == "safety_on":
        state.safety_enabled = True
    elif action == "safety_off":
        state.safety_enabled = False
    else:
        raise HubConfigError(f"unknown action {action!r}")
    return state


class SensorHub:
    """Wire-level hub: reads command bytes from its endpoint, answers each
    valid command with exactly one frame, ignores everything else."""

    def __init__(self, endpoint: Endpoint, model: AdcModel | None = None,
                 state: HubState | None = None):
        self.endpoint = endpoint
        self.model = model or AdcModel()
        self.state = state or HubState()

    def pump(self) -> int:
        """Process all delivered bytes; returns the number of responses sent."""
        sent = 0
        for byte in self.endpoint.read():
            cmd = decode_command(byte)
            if cmd is None:
                continue  # the hub does nothing while waiting
            self.endpoint.write(encode_response(serve(self.state, cmd, self.model)))
            sent += 1
        return sent
