import numpy as np
import pytest
from hypothesis import given, strategies as st

from riveq import (
    InitialConditionViolation,
    JumpRecord,
    MalformedCurve,
    Partition,
    PreconditionViolation,
    Segment,
    TIE_RULES,
    ValidationError,
    VECurve,
    augmented_variation,
    check_restriction_concatenation,
    concatenate,
    energy_balance,
    extract_limit,
    ims_solve,
    solve_monotone,
    total_variation_psi,
    validate_ve,
    work_integral,
)
from riveq import Loading

from conftest import play_system, quartic_system


def play_exact(t):
    return np.maximum(0.0, np.asarray(t) - 1.0)


@pytest.fixture(scope="module")
def maxwell_curve():
    return solve_monotone(quartic_system(0), -1.0, samples=513)


def toy_curve():
    sys = quartic_system(0)
    s1 = Segment([0.0, 0.25, 0.5], [-1.0, -1.0, -1.0])
    s2 = Segment([0.5, 0.8, 1.2], [1.0, 1.1, 1.2])
    return VECurve(sys, (0.0, 1.2), [s1, s2], [JumpRecord(0.5, -1.0, -1.0, 1.0)])


def test_partition():
    p = Partition.uniform(0, 1, 4)
    assert p.steps == 4 and p.max_step == pytest.approx(0.25)
    assert p.refine().steps == 8 and np.allclose(p.refine().nodes[::2], p.nodes)
    with pytest.raises(ValidationError):
        Partition([0.0, 0.0, 1.0])
    with pytest.raises(ValidationError):
        Partition([0.0])


@pytest.mark.parametrize("rule", TIE_RULES)
def test_ims_play_operator_is_exact(rule):
    # [DERIVED] W = u^2/2, alpha = 1, delta = 0: U^n = max(0, t^n - 1) on any partition
    sys = play_system(0)
    d = ims_solve(sys, Partition.uniform(0, 2, 64), 0.0, rule)
    assert np.max(np.abs(d.values - play_exact(d.times))) < 1e-9
    assert np.max(np.abs(d.membership_defects())) < 1e-12


def test_ims_viscous_lag():
    # [DERIVED] with delta = (mu/2) h^2 each step closes 1/(1+mu) of the gap
    sys = play_system(1.0)
    p = Partition.uniform(0, 2, 8)
    d = ims_solve(sys, p, 0.0)
    u, ref = 0.0, [0.0]
    for t in p.nodes[1:]:
        u = u + max(t - 1.0 - u, 0.0) / 2.0
        ref.append(u)
    assert d.values == pytest.approx(ref, abs=1e-9)


def test_ims_validation():
    sys = play_system(0)
    with pytest.raises(ValidationError):
        ims_solve(sys, Partition.uniform(0, 2, 4), 0.0, "random")
    with pytest.raises(ValidationError):
        ims_solve(sys, Partition.uniform(0, 3, 4), 0.0)


def test_tie_rules_split_at_the_maxwell_time():
    sys = quartic_system(0)
    p = Partition([0.0, 0.25, 0.5])
    assert ims_solve(sys, p, -1.0, "nearest").values[-1] == pytest.approx(-1.0)
    assert ims_solve(sys, p, -1.0, "nearest-right").values[-1] == pytest.approx(1.0)
    d = ims_solve(sys, p, -1.0, "global-min")
    assert d.multiple[-1]


def test_curve_evaluation_and_limits():
    c = toy_curve()
    assert c.value(0.5) == -1.0 and c.left_limit(0.5) == -1.0 and c.right_limit(0.5) == 1.0
    assert c.value(1.0) == pytest.approx(1.15)
    assert c.breakpoints == [0.0, 0.5, 1.2]


def test_malformed_curves():
    sys = quartic_system(0)
    s1 = Segment([0.0, 0.5], [-1.0, -1.0])
    s2 = Segment([0.5, 1.2], [1.0, 1.2])
    with pytest.raises(MalformedCurve):
        VECurve(sys, (0.0, 1.2), [s1, s2], [])
    with pytest.raises(MalformedCurve):
        VECurve(sys, (0.0, 1.2), [s1, s2], [JumpRecord(0.5, -1.0, 2.0, 1.0)])
    with pytest.raises(MalformedCurve):
        VECurve(sys, (0.0, 1.2), [s1, s2], [JumpRecord(0.5, -0.9, -0.9, 1.0)])
    with pytest.raises(MalformedCurve):
        Segment([0.0, 0.0], [1.0, 1.0])
    a = toy_curve().restrict(0.0, 0.4)
    b = toy_curve().restrict(0.6, 1.2)
    with pytest.raises(MalformedCurve):
        concatenate(a, b)


def test_restrict_keeps_jump_halves():
    c = toy_curve()
    left, right = c.restrict(0.0, 0.5), c.restrict(0.5, 1.2)
    # u = u_left at the jump, so only the right piece keeps a nontrivial half
    assert not left.jumps and left.value(0.5) == -1.0
    assert right.value(0.5) == -1.0 and right.right_limit(0.5) == 1.0
    glued = concatenate(left, right)
    ts = np.linspace(0, 1.2, 97)
    assert np.allclose(glued(ts), c(ts)) and len(glued.jumps) == 1


@given(st.floats(0.01, 1.19))
def test_variation_is_additive(s):
    c = toy_curve()
    whole = total_variation_psi(c)
    assert whole == pytest.approx(total_variation_psi(c, 0.0, s) + total_variation_psi(c, s, 1.2), abs=1e-12)
    assert whole == pytest.approx(0.5 * 2.2)


def test_discrete_and_curve_variation_agree():
    d = ims_solve(play_system(0), Partition.uniform(0, 2, 32), 0.0)
    assert total_variation_psi(d) == pytest.approx(total_variation_psi(d.to_curve()))
    assert total_variation_psi(d) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        total_variation_psi(d, 1.0, 0.5)


def test_play_work_integral_closed_form():
    # [DERIVED] u = (t - 1)^+, l' = 1: work = -int_1^2 (t - 1) dt = -1/2
    d = ims_solve(play_system(0), Partition.uniform(0, 2, 16), 0.0)
    assert work_integral(play_system(0), d.to_curve()) == pytest.approx(-0.5, abs=1e-14)


def test_step_interpolant_defect_halves():
    sys = play_system(1.0)
    defects = [energy_balance(sys, ims_solve(sys, Partition.uniform(0, 2, n), 0.0).to_curve("step")).defect
               for n in (64, 128, 256)]
    assert all(d < 0 for d in defects)
    for a, b in zip(defects, defects[1:]):
        assert b / a == pytest.approx(0.5, rel=0.2)


def test_solve_monotone_play_is_exact():
    sys = play_system(1.0)
    c = solve_monotone(sys, 0.0, samples=129)
    ts, us = c.samples()
    assert np.max(np.abs(us - play_exact(ts))) < 1e-9
    assert not c.jumps
    assert validate_ve(sys, c).passed


def test_solve_monotone_maxwell(maxwell_curve):
    c = maxwell_curve
    assert len(c.jumps) == 1
    j = c.jumps[0]
    assert j.t == pytest.approx(0.5, abs=1e-9)
    assert (j.u_left, j.u_right) == pytest.approx((-1.0, 1.0), abs=1e-6)
    rep = validate_ve(c.sys, c)
    assert rep.passed, rep.violations
    av = augmented_variation(c.sys, c)
    assert av.jump_increment == pytest.approx(0.0, abs=1e-9)


def test_solve_monotone_preconditions():
    with pytest.raises(InitialConditionViolation):
        solve_monotone(play_system(0), 2.0)
    # unstable towards the load: an initial jump at t = a onto the threshold
    c = solve_monotone(play_system(0), -1.5, samples=65)
    assert c.jumps[0].t == 0.0 and c.jumps[0].u_right == pytest.approx(-1.0, abs=1e-9)
    sine = quartic_system(0).with_loading(Loading.sine(1, 1, 0, (0, 6)))
    with pytest.raises(PreconditionViolation):
        solve_monotone(sine, -1.0)


def test_restriction_and_concatenation_commute(maxwell_curve):
    assert check_restriction_concatenation(maxwell_curve.sys, maxwell_curve, [0.3, 0.5, 0.9], checks="abe")


def test_extract_limit_play():
    sys = play_system(1.0)
    c = extract_limit(sys, 0.0, levels=3, n0=128)
    ts, us = c.samples()
    assert np.max(np.abs(us - play_exact(ts))) < 1e-8
    assert c.meta["cauchy_defect"] < 1e-2 and not c.jumps
    assert validate_ve(sys, c).passed
    with pytest.raises(ValidationError):
        extract_limit(sys, 0.0, levels=2)
