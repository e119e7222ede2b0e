import random
from fractions import Fraction

import pytest

from umphcs.diagnostics import (
    DegenerateLensSystem,
    LensBench,
    eye_power,
    eye_power_trace,
)

# Published bench table: distance (cm) -> power (D) for both lens pairs.
# The moving lens is listed first in the pair name.
TABLE_HYPER = {  # +5 D moving, -2 D eyepiece-side
    1.5: -1.3, 2: 0.266667, 2.5: 1.833333, 3: 3.4, 3.5: 4.966667,
    4: 6.533333, 4.5: 8.1, 5: 9.666667, 5.5: 11.23333, 6: 12.8,
    6.5: 14.36667, 7: 15.93333, 7.5: 17.5,
}
TABLE_MYOPIA = {  # -5 D moving, +2 D eyepiece-side
    1.5: 0.7, 2: -1.06667, 2.5: -2.83333, 3: -4.6, 3.5: -6.36667,
    4: -8.13333, 4.5: -9.9, 5: -11.6667, 5.5: -13.4333, 6: -15.2,
    6.5: -16.9667, 7: -18.7333, 7.5: -20.5,
}
HYPER = LensBench(p1=-2.0, p2=5.0)
MYOPIA = LensBench(p1=2.0, p2=-5.0)


def rational_power(d_cm, p1, p2, l="0.03", L="0.015"):
    """Exact-arithmetic oracle for the closed form."""
    d = Fraction(d_cm) / 100
    p1, p2, l, L = Fraction(p1), Fraction(p2), Fraction(l), Fraction(L)
    return (d * p2 - l * p1 - l * p2 + l * d * p1 * p2) / L


def print_decimals(value: float) -> int:
    text = repr(value)
    return len(text.split(".")[1]) if "." in text else 0


class TestClosedForm:
    @pytest.mark.parametrize("d_cm,expected", sorted(TABLE_HYPER.items()))
    def test_hyper_column(self, d_cm, expected):
        assert eye_power(d_cm / 100, HYPER) == pytest.approx(expected, abs=1e-5)

    @pytest.mark.parametrize("d_cm,expected", sorted(TABLE_MYOPIA.items()))
    def test_myopia_column(self, d_cm, expected):
        # entries printed with fewer decimals get the matching print tolerance
        tol = max(1e-5, 0.5 * 10 ** -print_decimals(expected))
        assert eye_power(d_cm / 100, MYOPIA) == pytest.approx(expected, abs=tol)

    @pytest.mark.parametrize("d_cm", sorted(TABLE_HYPER))
    def test_float_matches_exact_rational(self, d_cm):
        exact = rational_power(d_cm, -2, 5)
        assert eye_power(d_cm / 100, HYPER) == pytest.approx(float(exact), abs=1e-12)

    def test_range_endpoints(self):
        assert eye_power(0.015, HYPER) == pytest.approx(-1.30, abs=1e-2)
        assert eye_power(0.075, HYPER) == pytest.approx(17.50, abs=1e-2)

    def test_no_lenses_no_power(self):
        assert eye_power(0.05, LensBench(p1=1e-12, p2=1e-12)) == pytest.approx(0.0, abs=1e-9)
        # exact zero-powers are total for the closed form too
        assert eye_power(0.05, LensBench(p1=0.0, p2=0.0)) == 0.0

    def test_affine_in_distance(self):
        p_a = eye_power(0.02, HYPER)
        p_b = eye_power(0.04, HYPER)
        p_mid = eye_power(0.03, HYPER)
        assert p_mid == pytest.approx((p_a + p_b) / 2, rel=1e-12)


class TestTrace:
    def test_table_row_2cm(self):
        trace = eye_power_trace(0.02, HYPER)
        assert trace.power == pytest.approx(0.266667, abs=1e-5)
        assert trace.power == pytest.approx(1.0 / trace.f_spectacle, rel=1e-12)

    def test_intermediates_row_2cm(self):
        trace = eye_power_trace(0.02, HYPER)
        # f1 = -0.5, f2 = 0.2: F' = (-0.1)/(-0.32), alpha = F'*d/f2
        assert trace.f_equiv == pytest.approx(0.3125)
        assert trace.alpha == pytest.approx(0.03125)

    def test_pole_raises(self):
        d_pole = 1 / HYPER.p1 + 1 / HYPER.p2  # f1 + f2
        with pytest.raises(DegenerateLensSystem):
            eye_power_trace(d_pole, HYPER)

    def test_zero_power_lens_raises(self):
        with pytest.raises(DegenerateLensSystem):
            eye_power_trace(0.02, LensBench(p1=0.0, p2=5.0))

    def test_matches_closed_form_over_random_benches(self):
        rng = random.Random(424242)
        checked = 0
        while checked < 1000:
            d = rng.uniform(0.01, 0.09)
            p1 = rng.choice([-1, 1]) * rng.uniform(0.5, 8.0)
            p2 = rng.choice([-1, 1]) * rng.uniform(0.5, 8.0)
            if abs(1 / p1 + 1 / p2 - d) < 1e-6:
                continue
            bench = LensBench(p1=p1, p2=p2, l=rng.uniform(0.01, 0.05),
                              L=rng.uniform(0.005, 0.03))
            closed = eye_power(d, bench)
            traced = eye_power_trace(d, bench).power
            assert abs(traced - closed) <= 1e-12 * max(abs(traced), abs(closed), 1e-9)
            checked += 1
