"""Pure-tone sweep state machine.

Six octave frequencies from 250 Hz to 8 kHz, level stepping up from -5 dB HL
in 5 dB steps. A heard tone records the current level as that frequency's
threshold and moves on at -5 dB; stepping past 80 dB records no-response.
The state is a value: each event returns a new state, nothing is shared.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

SWEEP_FREQUENCIES_HZ: tuple[int, ...] = (250, 500, 1000, 2000, 4000, 8000)
LEVEL_MIN_DB = -5
LEVEL_MAX_DB = 80
LEVEL_STEP_DB = 5

HEARD = "heard"
NOT_HEARD = "not_heard"
TIMEOUT = "timeout"

NO_RESPONSE = None  # audiogram entry for "never heard at any level"


class StepAfterFinish(RuntimeError):
    pass


class NotFinished(RuntimeError):
    pass


@dataclass(frozen=True)
class HearingState:
    freq_index: int = 0
    level_db: int = LEVEL_MIN_DB
    results: tuple[tuple[int, int | None], ...] = field(default_factory=tuple)

    @property
    def finished(self) -> bool:
        return self.freq_index >= len(SWEEP_FREQUENCIES_HZ)

    @property
    def current_freq_hz(self) -> int:
        if self.finished:
            raise StepAfterFinish("sweep already finished")
        return SWEEP_FREQUENCIES_HZ[self.freq_index]


def hearing_step(state: HearingState, event: str) -> HearingState:
    """Advance the sweep by one patient event (heard / not_heard / timeout)."""
    if state.finished:
        raise StepAfterFinish("sweep already finished")
    if event == HEARD:
        entry = (state.current_freq_hz, state.level_db)
    elif event in (NOT_HEARD, TIMEOUT):
        if state.level_db + LEVEL_STEP_DB > LEVEL_MAX_DB:
            entry = (state.current_freq_hz, NO_RESPONSE)
        else:
            return replace(state, level_db=state.level_db + LEVEL_STEP_DB)
    else:
        raise ValueError(f"unknown hearing event {event!r}")
    return HearingState(freq_index=state.freq_index + 1, level_db=LEVEL_MIN_DB,
                        results=state.results + (entry,))


def audiogram(state: HearingState) -> dict[int, int | None]:
    """Threshold (dB HL) per sweep frequency; None marks no response."""
    if not state.finished:
        raise NotFinished("sweep still in progress")
    return dict(state.results)


def run_sweep(respond) -> HearingState:
    """Drive a full sweep against a responder callback (freq, level) -> bool.

    Terminates within len(frequencies) * number-of-levels steps.
    """
    state = HearingState()
    while not state.finished:
        heard = respond(state.current_freq_hz, state.level_db)
        state = hearing_step(state, HEARD if heard else NOT_HEARD)
    return state
