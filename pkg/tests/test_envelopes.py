import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riveq import OutOfRange, ValidationError, build_envelope, contact_selection, p_left, p_right

from conftest import play_system, quartic_system


@pytest.fixture(scope="module")
def maxwell_env():
    return build_envelope(quartic_system(0), -1.0)


def test_envelope_dominates_slope_and_is_monotone(maxwell_env):
    e = maxwell_env
    assert np.all(e.values >= e.slope - 1e-15)
    assert np.all(np.diff(e.values) >= 0)
    low = build_envelope(quartic_system(0), 1.0, "lower_of_sl")
    assert np.all(low.values <= low.slope + 1e-15)
    assert np.all(np.diff(low.values) >= 0)


def test_maxwell_plateau(maxwell_env):
    e = maxwell_env
    assert e.plateaus() == pytest.approx([0.0], abs=1e-12)
    assert p_left(e, 0.0) == pytest.approx(-1.0, abs=1e-9)
    assert p_right(e, 0.0) == pytest.approx(1.0, abs=1e-6)
    pts = contact_selection(e, 0.0)
    assert [a for a, b in pts] == pytest.approx([-1.0, 1.0], abs=1e-6)


@given(st.floats(0.01, 3.0))
def test_above_the_plateau_the_envelope_inverts_w_prime(level):
    # [DERIVED] past the Maxwell plateau W'_ir = W' on the right branch
    e = build_envelope(quartic_system(0), -1.0)
    root = max(r.real for r in np.roots([1, 0, -1, -level]) if abs(r.imag) < 1e-9)
    assert p_left(e, level) == pytest.approx(root, abs=1e-7)
    assert p_right(e, level) == pytest.approx(root, abs=1e-7)


def test_lower_side_mirrors_upper():
    low = build_envelope(quartic_system(0), 1.0, "lower_of_sl")
    assert low.interval(0.0) == pytest.approx((-1.0, 1.0), abs=1e-6)
    assert low.plateaus() == pytest.approx([0.0], abs=1e-12)


def test_convex_envelope_is_the_derivative():
    e = build_envelope(play_system(), 0.0)
    for L in (0.1, 0.7, 1.9):
        assert e.p_left(L) == pytest.approx(L, abs=1e-8)
        assert e.envelope_at(L) == pytest.approx(L, abs=1e-10)


def test_delay_plateau_at_the_spinodal_level():
    e = build_envelope(quartic_system(1.0), -1.0)
    assert e.plateaus() == pytest.approx([2 / (3 * math.sqrt(3))], abs=1e-9)


def test_errors(maxwell_env):
    with pytest.raises(ValidationError):
        build_envelope(quartic_system(0), -1.0, "sideways")
    with pytest.raises(ValidationError):
        build_envelope(quartic_system(0), -1.0, domain_end=-2.0)
    with pytest.raises(OutOfRange):
        maxwell_env.p_left(1e6)
    with pytest.raises(OutOfRange):
        maxwell_env.envelope_at(-1.5)
