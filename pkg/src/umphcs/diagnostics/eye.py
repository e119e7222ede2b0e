"""Two-lens refraction bench: spectacle power from lens separation.

The bench holds a fixed lens near the eyepiece (power p1) and a moving
lens (power p2) whose distance d from the first is set by the slide pot.
The prescribed spectacle power at the standard spectacle plane is

    P(d) = (d*p2 - l*p1 - l*p2 + l*d*p1*p2) / L

with l the eye-to-eyepiece distance and L the spectacle-plane distance.
eye_power evaluates that closed form directly; eye_power_trace walks the
optics step by step (equivalent focal length, virtual lens position,
spectacle-plane equivalent) and must agree to 1e-12 relative.
"""

from __future__ import annotations

from dataclasses import dataclass

DEGENERACY_EPS = 1e-9


class DegenerateLensSystem(ArithmeticError):
    """Lens separation at the combined-focal-length pole (or a zero-power
    lens): the stepwise construction has no finite answer there."""


@dataclass(frozen=True)
class LensBench:
    p1: float = -2.0   # diopters, eyepiece-side lens
    p2: float = 5.0    # diopters, moving lens
    l: float = 0.03    # m, eye to eyepiece
    L: float = 0.015   # m, spectacle plane distance

    def __post_init__(self):
        if self.l <= 0 or self.L <= 0:
            raise ValueError("bench distances must be positive")


@dataclass(frozen=True)
class EyePowerTrace:
    d: float            # m, lens separation
    f_equiv: float      # m, equivalent focal length of the pair
    alpha: float        # m, virtual position of the equivalent lens
    f_spectacle: float  # m, equivalent focal length at the spectacle plane
    power: float        # diopters


def eye_power(d: float, bench: LensBench = LensBench()) -> float:
    """Closed-form spectacle power; total for every finite input."""
    num = d * bench.p2 - bench.l * bench.p1 - bench.l * bench.p2 \
        + bench.l * d * bench.p1 * bench.p2
    return num / bench.L


def eye_power_trace(d: float, bench: LensBench = LensBench()) -> EyePowerTrace:
    """Stepwise construction with all optical intermediates.

    The spectacle-plane combination uses a signed eye offset of -l, which
    is what makes the trace agree with the closed form.
    """
    if bench.p1 == 0.0 or bench.p2 == 0.0:
        raise DegenerateLensSystem("zero-power lens has no finite focal length")
    f1 = 1.0 / bench.p1
    f2 = 1.0 / bench.p2
    denom = f1 + f2 - d
    if abs(denom) < DEGENERACY_EPS:
        raise DegenerateLensSystem("lens separation sits at the combined focal pole")
    f_equiv = f1 * f2 / denom
    alpha = f_equiv * d / f2
    f_spectacle = f_equiv * bench.L / (-bench.l + alpha)
    return EyePowerTrace(d=d, f_equiv=f_equiv, alpha=alpha,
                         f_spectacle=f_spectacle, power=1.0 / f_spectacle)
