import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riveq import MinimizeSettings, NonFiniteValue, ValidationError, coercive_bracket, global_min
from riveq.numerics import golden_section, integrate

from conftest import quartic_system


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_golden_section_parabola(c, k):
    x, fx = golden_section(lambda v: k * (v - c) ** 2, -3, 3, 1e-10)
    assert abs(x - c) < 1e-8
    assert fx < 1e-14 * k + 1e-15


def test_global_min_keeps_ties():
    res = global_min(lambda v: (v * v - 1) ** 2, -2, 2)
    assert res.minimizers == pytest.approx((-1.0, 1.0), abs=1e-9)
    assert res.min_value == pytest.approx(0.0, abs=1e-15)
    assert 1.0 in res and 0.0 not in res


def test_global_min_pins_a_kink():
    # |v - 0.3| has its minimizer on the kink, between grid points
    res = global_min(lambda v: np.abs(v - 0.3001), -1, 1, extra_points=(0.3001,))
    assert res.minimizers == (0.3001,)


def test_global_min_derivative_refinement():
    f = lambda v: (v - 0.123456789) ** 2 + 1.0
    df = lambda v: 2 * (v - 0.123456789)
    res = global_min(f, -1, 1, deriv=df)
    assert res.minimizers[0] == pytest.approx(0.123456789, abs=1e-13)


def test_global_min_rejects_bad_input():
    with pytest.raises(ValidationError):
        global_min(lambda v: v, 1, 0)
    with pytest.raises(NonFiniteValue), np.errstate(invalid="ignore", divide="ignore"):
        global_min(lambda v: np.log(v), -1, 1)
    with pytest.raises(ValidationError):
        MinimizeSettings(grid_points=4)


@given(st.floats(-1.5, 1.5), st.floats(0.0, 1.2))
def test_coercive_bracket_contains_minimizers(u, t):
    sys = quartic_system(1.0)
    lo, hi = coercive_bracket(sys, u)
    v = np.linspace(-6, 6, 24001)
    g = sys.energy(t, v) + sys.dissipation(u, v)
    vstar = v[np.argmin(g)]
    assert lo < vstar < hi


def test_integrate_known_values():
    assert integrate(math.sin, 0, math.pi) == pytest.approx(2.0, abs=1e-10)
    assert integrate(lambda x: x ** 3, 0, 2) == pytest.approx(4.0, abs=1e-12)
    assert integrate(math.exp, 1, 1) == 0.0
    with pytest.raises(ValidationError):
        integrate(math.exp, 1, 0)
