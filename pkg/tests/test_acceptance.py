"""The nine acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed together at the end of the
run. Criterion 5 cannot hold for the quadratic correction (the trigger level
saturates at the delay value once mu >= 2/3); it is reported as FAIL and
marked as a strict expected failure, and the behaviour that does hold is
checked in test_trigger_levels_follow_the_oracle.
"""

import math
import time

import numpy as np
import pytest

from riveq import (
    Transition,
    build_optimal_transition,
    certify_optimal,
    check_stability_1d,
    dp_transition,
    energy_balance,
    extract_limit,
    ims_solve,
    is_stable_by_definition,
    Loading,
    Partition,
    slope_pair,
    slopes_batch,
    solve_monotone,
    three_point_increment,
    total_variation_psi,
    transition_cost,
    validate_ve,
)

from conftest import play_system, quartic_system
from oracles import trigger

SPINODAL_LEVEL = 2 / (3 * math.sqrt(3))
MU_GRID = [round(0.1 * k, 10) for k in range(11)]


def main_jump(curve):
    return max(curve.jumps, key=lambda j: j.size)


@pytest.fixture(scope="module")
def maxwell():
    sys = quartic_system(0.0)
    t0 = time.perf_counter()
    curve = extract_limit(sys, -1.0, levels=4, n0=2048)
    return sys, curve, time.perf_counter() - t0


@pytest.fixture(scope="module")
def delay():
    sys = quartic_system(1.0)
    return sys, solve_monotone(sys, -1.0)


@pytest.fixture(scope="module")
def modified():
    sys = quartic_system(1 / 3)
    return sys, solve_monotone(sys, -1.0)


@pytest.fixture(scope="module")
def trigger_levels():
    out = []
    for mu in MU_GRID:
        sys = quartic_system(mu)
        c = solve_monotone(sys, -1.0, samples=257, attach_transitions=False)
        out.append(float(sys.ell.value(main_jump(c).t)) - sys.psi.alpha_plus)
    return np.array(out)


@pytest.fixture(scope="module")
def hysteresis():
    sys = quartic_system(1.0).with_loading(Loading.sine(1.0, 1.0, 0.0, (0.0, 4 * math.pi)))
    return sys, extract_limit(sys, -1.0, levels=3, n0=2048)


def test_criterion_1_slope_collapse(acceptance):
    sys = quartic_system(1.0)
    u = np.linspace(-2.0, 2.0, 2048)
    t0 = time.perf_counter()
    err = max(np.max(np.abs(slopes_batch(sys, u, side) - (u ** 3 - u))) for side in ("ir", "sl"))
    dt = time.perf_counter() - t0
    ok = err <= 1e-6 and dt < 5.0
    acceptance(1, ok, f"max |slope - W'| = {err:.2e} (<= 1e-6), {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_2_maxwell_rule(acceptance, maxwell):
    sys, curve, dt = maxwell
    j = main_jump(curve)
    level = float(sys.ell.value(j.t))
    inc = three_point_increment(sys, j)
    ok = (abs(level - 0.5) <= 1e-3 and abs(j.u_left + 1) <= 1e-3 and abs(j.u_right - 1) <= 1e-3
          and abs(inc) <= 1e-6 and dt < 30.0)
    acceptance(2, ok, f"jump {j.u_left:.6f} -> {j.u_right:.6f} at l(t*) = {level:.6f}, "
                      f"increment {inc:.1e}, {dt:.1f} s at N = 2^14")
    assert ok


def test_criterion_3_delay_rule(acceptance, delay):
    sys, curve = delay
    j = main_jump(curve)
    level = float(sys.ell.value(j.t)) - sys.psi.alpha_plus
    tr = build_optimal_transition(sys, j.t, j.u_left, j.u_right, cross_check=True)
    rep = certify_optimal(sys, tr, recompute=True)
    worst = max(rep.variation_violation, rep.membership_violation, rep.drop_defect)
    ok = (abs(level - SPINODAL_LEVEL) <= 1e-3 and abs(j.u_left + 1 / math.sqrt(3)) <= 1e-3
          and abs(j.u_right - 2 / math.sqrt(3)) <= 1e-3
          and tr.meta["cases"] == ("double_chain",) and worst <= 1e-7 and rep.certified)
    acceptance(3, ok, f"trigger {level:.5f}, {j.u_left:.5f} -> {j.u_right:.5f}, "
                      f"cases {tr.meta['cases']}, certificate violation {worst:.1e}, "
                      f"eps cross-check {tr.meta.get('eps_cross_check', float('nan')):.1e}")
    assert ok


def test_criterion_4_modified_maxwell_rule(acceptance, modified):
    sys, curve = modified
    j = main_jump(curve)
    L = float(sys.ell.value(j.t)) - sys.psi.alpha_plus
    tr = j.right if j.right is not None else build_optimal_transition(sys, j.t, j.u, j.u_right)
    ul, z = tr.points[0], tr.points[1]
    W = sys.W
    identity = abs(W.value(z) - W.value(ul) - L * (z - ul) + sys.delta.value(ul, z, sys.psi))
    ok = (abs(L - math.sqrt(2 / 3) / 3) <= 1e-3 and tr.gap_kinds[0] == "hole"
          and abs(z - math.sqrt(2 / 3)) <= 1e-3 and identity <= 1e-8
          and abs(tr.points[-1] - 1.1153) <= 2e-3)
    acceptance(4, ok, f"trigger {L:.5f}, hole {ul:.5f} -> {z:.5f} (identity residual {identity:.1e}), "
                      f"rest point {tr.points[-1]:.5f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the trigger level saturates at the delay value for mu >= 2/3")
def test_criterion_5_regime_interpolation(acceptance, trigger_levels):
    gaps = np.diff(trigger_levels)
    ok = bool(np.all(gaps >= 1e-4))
    k = int(np.argmin(gaps))
    acceptance(5, ok, f"smallest step {gaps[k]:.1e} between mu = {MU_GRID[k]} and {MU_GRID[k + 1]} "
                      f"(needs >= 1e-4); levels saturate at {SPINODAL_LEVEL:.5f}")
    assert ok


def test_trigger_levels_follow_the_oracle(trigger_levels):
    # [DERIVED] mu sqrt(1 - mu) up to mu = 2/3, the spinodal level beyond
    ref = np.array([trigger(mu)[0] for mu in MU_GRID])
    assert np.max(np.abs(trigger_levels - ref)) < 1e-6
    below = [k for k, mu in enumerate(MU_GRID) if mu < 2 / 3]
    assert np.all(np.diff(trigger_levels[below]) >= 1e-4)
    above = [k for k, mu in enumerate(MU_GRID) if mu > 2 / 3]
    assert np.allclose(trigger_levels[above], SPINODAL_LEVEL, atol=1e-9)


def test_criterion_6_energy_balance(acceptance, maxwell, delay, modified):
    parts, ok = [], True
    for name, (sys, curve) in (("maxwell", maxwell[:2]), ("delay", delay), ("modified", modified)):
        rep = validate_ve(sys, curve)
        bound = 1e-5 * (1 + rep.energy_range)
        ok &= abs(rep.balance.defect) <= bound
        parts.append(f"{name} {rep.balance.defect:.1e}")
    psys = play_system(1.0)
    defects = [energy_balance(psys, ims_solve(psys, Partition.uniform(0, 2, n), 0.0).to_curve("step")).defect
               for n in (256, 512, 1024)]
    ratios = [b / a for a, b in zip(defects, defects[1:])]
    ok &= all(abs(r - 0.5) <= 0.1 for r in ratios)
    acceptance(6, ok, "defects " + ", ".join(parts) + "; play halving ratios "
                      + ", ".join(f"{r:.3f}" for r in ratios))
    assert ok


def test_criterion_7_stability_equivalence(acceptance):
    details, ok = [], True
    for mu in (0.0, 1.0):
        sys = quartic_system(mu)
        ts = np.linspace(*sys.interval, 100)
        us = np.linspace(-2.0, 2.0, 100)
        pairs = [slope_pair(sys, u) for u in us]
        band = disagree = outside = 0
        for t in ts:
            for u, p in zip(us, pairs):
                v = check_stability_1d(sys, t, u, pair=p)
                near = min(abs(v.margin_ir), abs(v.margin_sl)) < 1e-6
                band += near
                if is_stable_by_definition(sys, t, u) != v.stable:
                    disagree += 1
                    outside += not near
        frac = band / (ts.size * us.size)
        ok &= outside == 0 and frac <= 0.02
        details.append(f"mu={mu:g}: {disagree} disagreements, {outside} outside a band of {100 * frac:.2f}%")
    acceptance(7, ok, "; ".join(details))
    assert ok


def test_criterion_8_cost_properties(acceptance):
    rng = np.random.default_rng(20261014)
    systems = [quartic_system(mu) for mu in (0.0, 0.3, 1.0, 2.0)]
    add_worst = bound_worst = 0.0
    for n in range(1000):
        sys = systems[n % 4]
        t = rng.uniform(*sys.interval)
        k = int(rng.integers(3, 9))
        pts = np.sort(rng.uniform(-2, 2, k))
        if rng.random() < 0.5:
            pts = pts[::-1]
        kinds = tuple(rng.choice(["hole", "accumulation", "continuum"], k - 1))
        tr = Transition(t, tuple(pts), kinds)
        whole = transition_cost(sys, tr, recompute=True).total
        a, b = tr.split(int(rng.integers(1, k - 1)))
        parts = transition_cost(sys, a, recompute=True).total + transition_cost(sys, b, recompute=True).total
        add_worst = max(add_worst, abs(whole - parts))
        # the lower bound concerns genuine discrete transitions: every gap a hole
        holes = Transition(t, tuple(pts))
        E = sys.energy(t, pts)
        bound_worst = max(bound_worst, E[0] - E[-1] - transition_cost(sys, holes, recompute=True).total)

    dp_worst = 0.0
    for _ in range(20):
        s, r, ap = rng.uniform(0.5, 2.0), rng.uniform(0.05, 0.6), rng.uniform(0.2, 0.8)
        level, ul, z, rest = trigger(r * s, s)
        sys = quartic_system(r * s, alpha=ap, scale=s, interval=(0.0, level + ap + 1.0))
        t = level + ap
        tr = build_optimal_transition(sys, t, ul, rest, cross_check=False)
        c_con = transition_cost(sys, tr).total
        c_dp, _ = dp_transition(sys, t, ul, rest)
        dp_worst = max(dp_worst, abs(c_dp - c_con))
    ok = add_worst <= 1e-7 and bound_worst <= 1e-7 and dp_worst <= 1e-4
    acceptance(8, ok, f"additivity {add_worst:.1e}, lower bound {max(bound_worst, 0):.1e} "
                      f"(1000 transitions), DP vs constructive {dp_worst:.1e} (20 instances)")
    assert ok


def test_criterion_9_hysteresis_loop(acceptance, hysteresis):
    sys, curve = hysteresis
    P = 2 * math.pi
    tt = np.linspace(math.pi / 2, P, 500)
    closure = max(max(abs(curve.value(t) - curve.value(t + P)) for t in tt),
                  abs(curve.value(2 * P) - curve.value(P)))
    worst_var, intervals = 0.0, 0
    a, b = sys.interval
    for k in range(4):
        tr = math.pi / 2 + k * math.pi
        # the state still moves at the reversal itself; strict margins open
        # up right after it and last until the next threshold is reached
        grid = np.linspace(tr, min(b, tr + math.pi), 1201)
        u = curve(grid)
        ell = sys.ell.value(grid)
        m = np.minimum(sys.psi.alpha_plus - (ell - slopes_batch(sys, u, "ir")),
                       ell - slopes_batch(sys, u, "sl") + sys.psi.alpha_minus)
        strict = np.flatnonzero(m >= 1e-3)
        if strict.size == 0:
            continue
        i = j = int(strict[0])
        while j < grid.size - 1 and m[j + 1] >= 1e-3:
            j += 1
        intervals += 1
        worst_var = max(worst_var, total_variation_psi(curve, grid[i], grid[j]))
    ok = closure < 1e-3 and intervals == 4 and worst_var <= 1e-9
    acceptance(9, ok, f"closure gap {closure:.1e}, variation {worst_var:.1e} on {intervals} "
                      f"reversal intervals, {len(curve.jumps)} jumps")
    assert ok
