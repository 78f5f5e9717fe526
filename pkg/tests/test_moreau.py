import numpy as np
import pytest
from hypothesis import given, strategies as st

from riveq import is_stable_by_definition, moreau_yosida, residual, residuals_batch
from riveq.moreau import pick_nearest

from conftest import play_system, quartic_system
from oracles import brute_residual


@pytest.mark.parametrize("mu", [0.0, 1.0, 3.0])
@given(u=st.floats(-2.5, 2.5), t=st.floats(0, 2))
def test_play_residual_closed_form(mu, u, t):
    # [DERIVED] W = u^2/2, alpha = 1: R = ((|l - u| - 1)^+)^2 / (2 (1 + mu))
    sys = play_system(mu)
    d = max(abs(t - u) - 1.0, 0.0)
    assert residual(sys, t, u).value == pytest.approx(d * d / (2 * (1 + mu)), abs=1e-9)


@pytest.mark.parametrize("mu", [0.0, 0.5])
@given(u=st.floats(-1.6, 1.6), t=st.floats(0, 1.2))
def test_quartic_residual_matches_brute_force(mu, u, t):
    sys = quartic_system(mu)
    E = lambda v: sys.energy(t, v)
    ref = brute_residual(E, sys.dissipation, u)
    r = residual(sys, t, u).value
    assert r >= 0
    assert r == pytest.approx(ref, abs=1e-7)


def test_maxwell_tie_has_two_minimizers():
    sys = quartic_system(0)
    y, mset = moreau_yosida(sys, 0.5, -1.0)
    assert mset.minimizers == pytest.approx((-1.0, 1.0), abs=1e-9)
    assert y == pytest.approx(sys.energy(0.5, -1.0), abs=1e-12)
    assert residual(sys, 0.5, -1.0).value == pytest.approx(0.0, abs=1e-15)


def test_witness_points_to_a_better_state():
    sys = quartic_system(0)
    r = residual(sys, 0.8, -1.0)
    assert r.value > 0 and r.witness > 1.0
    assert is_stable_by_definition(sys, 0.8, r.witness)


def test_batch_agrees_with_scalar():
    for mu in (0.0, 1.0):
        sys = quartic_system(mu)
        u = np.linspace(-1.8, 1.8, 57)
        rb = residuals_batch(sys, 0.9, u)
        rs = np.array([residual(sys, 0.9, x).value for x in u])
        assert np.max(np.abs(rb - rs)) < 1e-9


def test_pick_nearest_rules():
    assert pick_nearest([-1.0, 1.0], 0.0) == -1.0
    assert pick_nearest([-1.0, 0.5, 2.0], 0.0, direction=1) == 0.5
    assert pick_nearest([-1.0, 2.0], 0.0, direction=-1) == -1.0
    assert pick_nearest([2.0], 0.0, direction=-1) == 2.0
