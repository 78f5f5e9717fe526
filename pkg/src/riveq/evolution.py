"""Time-incremental minimization, limit extraction, the monotone-load solver
and the validator for visco-energetic solutions.

A limit curve (VECurve) is stored as sampled continuous segments between
breakpoints plus one JumpRecord per jump time. A jump at t keeps the left
limit u_l, the value u(t) and the right limit u_r, with one transition for
each of the pairs (u_l, u) and (u, u_r).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._validation import as_float_array, as_positive_int, as_real
from .envelopes import build_envelope
from .errors import (
    ChainDivergence,
    DomainViolation,
    InitialConditionViolation,
    JumpConditionViolation,
    MalformedCurve,
    NonConvergence,
    PreconditionViolation,
    ValidationError,
)
from .numerics import MinimizeSettings
from .moreau import incremental_objective, moreau_yosida, pick_nearest, residual
from .slopes import slopes_batch
from .transitions import (
    Transition,
    build_optimal_transition,
    certify_optimal,
    check_jump_conditions,
    jump_cost,
    transition_cost,
)

TIE_RULES = ("nearest", "nearest-left", "nearest-right", "global-min")
MOVE_TOL = 1e-13
BRANCH_STABILITY_TOL = 1e-10
CURVE_TOL = 1e-8
# per-step energy gains scale like tau^2; a looser tie tolerance lets the
# "stay put" candidate win ties it should lose on fine partitions
IMS_SETTINGS = MinimizeSettings(value_tie_tol=1e-13)


# ---------------------------------------------------------------------------
# partitions and discrete solutions

@dataclass(frozen=True)
class Partition:
    nodes: np.ndarray

    def __post_init__(self):
        x = as_float_array(self.nodes, "partition nodes")
        if x.ndim != 1 or x.size < 2:
            raise ValidationError("a partition needs at least two nodes")
        if not np.all(np.diff(x) > 0):
            raise ValidationError("partition nodes must be strictly increasing")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, a, b, n):
        n = as_positive_int(n, "number of steps")
        return cls(np.linspace(float(a), float(b), n + 1))

    @property
    def max_step(self):
        return float(np.max(np.diff(self.nodes)))

    @property
    def steps(self):
        return self.nodes.size - 1

    def refine(self):
        """Dyadic refinement: every cell split at its midpoint."""
        x = self.nodes
        out = np.empty(2 * x.size - 1)
        out[0::2] = x
        out[1::2] = 0.5 * (x[:-1] + x[1:])
        return Partition(out)


@dataclass
class DiscreteSolution:
    sys: object
    partition: Partition
    values: np.ndarray
    multiple: np.ndarray  # True where the minimal set had more than one element
    tie_rule: str = "nearest"

    @property
    def times(self):
        return self.partition.nodes

    def membership_defects(self, settings=None):
        """E(t^n, U^n) + D(U^{n-1}, U^n) - Y(t^n, U^{n-1}) for every step."""
        t, U = self.times, self.values
        out = np.empty(U.size - 1)
        for n in range(1, U.size):
            y, _ = moreau_yosida(self.sys, t[n], U[n - 1], settings)
            g = incremental_objective(self.sys, t[n], U[n - 1])
            out[n - 1] = g(U[n]) - y
        return out

    def to_curve(self, interp="linear"):
        """The discrete values as a one-segment curve.

        ``interp="step"`` is the left-constant interpolant u = U^{n-1} on
        [t^{n-1}, t^n), for which the balance defect is exactly the sum of the
        per-step minimization defects.
        """
        if interp not in ("linear", "step"):
            raise ValidationError(f"unknown interpolation {interp!r}")
        seg = Segment(self.times.copy(), np.asarray(self.values, dtype=float).copy(), interp)
        return VECurve(self.sys, (float(self.times[0]), float(self.times[-1])), [seg], [],
                       {"source": f"discrete-{interp}"})


def _select(sys, t, u, mset, tie_rule):
    pts = mset.minimizers
    if len(pts) == 1:
        return pts[0]
    if tie_rule == "nearest":
        return pick_nearest(pts, u)
    if tie_rule in ("nearest-left", "nearest-right"):
        # prefer moving: the nearest element strictly on the requested side
        side = [p for p in pts if (p < u if tie_rule == "nearest-left" else p > u)]
        return pick_nearest(side or pts, u)
    g = incremental_objective(sys, t, u)
    return min(pts, key=lambda p: (g(p), p))


def ims_solve(sys, partition, u0, tie_rule="nearest", settings=None):
    """U^n chosen from the minimal set M(t^n, U^{n-1}) by ``tie_rule``."""
    if tie_rule not in TIE_RULES:
        raise ValidationError(f"tie_rule must be one of {TIE_RULES}")
    if not isinstance(partition, Partition):
        partition = Partition(partition)
    u0 = as_real(u0, "u0")
    if abs(u0) > sys.W.bound:
        raise DomainViolation(f"u0={u0} lies outside [-B, B] with B={sys.W.bound}")
    a, b = sys.interval
    t = partition.nodes
    if t[0] < a - 1e-12 or t[-1] > b + 1e-12:
        raise DomainViolation("partition leaves the loading interval")
    settings = settings or IMS_SETTINGS
    U = np.empty(t.size)
    multi = np.zeros(t.size, dtype=bool)
    U[0] = u = u0
    for n in range(1, t.size):
        _, mset = moreau_yosida(sys, t[n], u, settings)
        multi[n] = len(mset) > 1
        u = float(_select(sys, t[n], u, mset, tie_rule))
        U[n] = u
    return DiscreteSolution(sys, partition, U, multi, tie_rule)


# ---------------------------------------------------------------------------
# limit curves

@dataclass
class Segment:
    times: np.ndarray
    values: np.ndarray
    interp: str = "linear"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1 or self.times.shape != self.values.shape:
            raise MalformedCurve("segment needs matching 1-d time and value arrays")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise MalformedCurve("segment times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise MalformedCurve("segment values must be finite")

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t1(self):
        return float(self.times[-1])

    def __call__(self, t):
        if self.interp == "linear" or self.times.size == 1:
            return np.interp(t, self.times, self.values)
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1)
        return self.values[k]

    def clip(self, s, t):
        s, t = max(s, self.t0), min(t, self.t1)
        inside = (self.times > s) & (self.times < t)
        ts = np.concatenate([[s], self.times[inside], [t]]) if t > s else np.array([s])
        vs = np.asarray(self(ts), dtype=float)
        if self.interp == "step" and t >= self.t1:
            vs[-1] = self.values[-1]
        return Segment(ts, vs, self.interp)


@dataclass
class JumpRecord:
    t: float
    u_left: float
    u: float
    u_right: float
    left: Transition = None  # (u_left, u)
    right: Transition = None  # (u, u_right)

    @property
    def size(self):
        return abs(self.u_right - self.u_left)

    def halves(self):
        return ((self.u_left, self.u, self.left), (self.u, self.u_right, self.right))


@dataclass
class VECurve:
    sys: object
    interval: tuple
    segments: list
    jumps: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.check_well_formed()

    @property
    def breakpoints(self):
        a, b = self.interval
        inner = [j.t for j in self.jumps if a < j.t < b]
        return [a] + inner + [b]

    def check_well_formed(self, tol=CURVE_TOL):
        a, b = self.interval
        if not b >= a:
            raise MalformedCurve("curve interval must satisfy a <= b")
        bp = self.breakpoints
        if len(self.segments) != len(bp) - 1 and not (a == b and len(self.segments) == 1):
            raise MalformedCurve(f"{len(bp) - 1} continuity intervals need as many segments, "
                                 f"got {len(self.segments)}")
        for k, seg in enumerate(self.segments):
            lo, hi = bp[k], bp[min(k + 1, len(bp) - 1)]
            if abs(seg.t0 - lo) > 1e-12 * (1 + abs(lo)) or abs(seg.t1 - hi) > 1e-12 * (1 + abs(hi)):
                raise MalformedCurve(f"segment {k} covers [{seg.t0}, {seg.t1}], expected [{lo}, {hi}]")
        times = [j.t for j in self.jumps]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise MalformedCurve("jump times must be strictly increasing")
        by_t = {j.t: j for j in self.jumps}
        for j in self.jumps:
            if not a <= j.t <= b:
                raise MalformedCurve(f"jump at {j.t} lies outside the interval")
            lo, hi = min(j.u_left, j.u_right), max(j.u_left, j.u_right)
            if not lo - tol <= j.u <= hi + tol:
                raise MalformedCurve(f"jump at t={j.t}: u={j.u} is not between its one-sided limits")
        for k, seg in enumerate(self.segments):
            t0, t1 = seg.t0, seg.t1
            if t0 in by_t and abs(seg.values[0] - by_t[t0].u_right) > tol * (1 + abs(seg.values[0])):
                raise MalformedCurve(f"right limit at t={t0} does not match the jump record")
            if t1 in by_t and abs(seg.values[-1] - by_t[t1].u_left) > tol * (1 + abs(seg.values[-1])):
                raise MalformedCurve(f"left limit at t={t1} does not match the jump record")
            if k + 1 < len(self.segments) and t1 not in by_t:
                raise MalformedCurve(f"segments meet at t={t1} without a jump record")
        if a in by_t and abs(by_t[a].u_left - by_t[a].u) > tol:
            raise MalformedCurve("a jump at the initial time has no left limit")
        if b in by_t and b != a and abs(by_t[b].u_right - by_t[b].u) > tol:
            raise MalformedCurve("a jump at the final time has no right limit")

    # evaluation
    def _jump_at(self, t):
        for j in self.jumps:
            if abs(j.t - t) <= 1e-14 * (1 + abs(t)):
                return j
        return None

    def _segment_for(self, t, side=0):
        bp = self.breakpoints
        k = int(np.searchsorted(bp, t, side="left" if side < 0 else "right")) - 1
        return self.segments[int(np.clip(k, 0, len(self.segments) - 1))]

    def value(self, t):
        j = self._jump_at(t)
        if j is not None:
            return j.u
        return float(self._segment_for(t)(t))

    def left_limit(self, t):
        j = self._jump_at(t)
        return j.u_left if j is not None else self.value(t)

    def right_limit(self, t):
        j = self._jump_at(t)
        return j.u_right if j is not None else self.value(t)

    def samples(self):
        """(times, values) of all segment samples, in order (jump times repeated)."""
        ts = np.concatenate([s.times for s in self.segments])
        vs = np.concatenate([s.values for s in self.segments])
        return ts, vs

    def __call__(self, t):
        return np.array([self.value(float(x)) for x in np.atleast_1d(t)])

    def restrict(self, s, t):
        """Restriction to [s, t]; a jump at s keeps only its right half and a
        jump at t only its left half."""
        a, b = self.interval
        s, t = float(s), float(t)
        if not a <= s <= t <= b:
            raise ValidationError(f"[{s}, {t}] is not inside [{a}, {b}]")
        segs = []
        for seg in self.segments:
            if seg.t1 < s or seg.t0 > t or (seg.t1 == s and seg.t0 < s) or (seg.t0 == t and seg.t1 > t):
                continue
            segs.append(seg.clip(s, t))
        if not segs:
            segs = [Segment(np.array([s]), np.array([self.value(s)]))]
        jumps = []
        for j in self.jumps:
            if j.t < s or j.t > t:
                continue
            if j.t == s and s != t:
                j = JumpRecord(j.t, j.u, j.u, j.u_right, None, j.right)
            elif j.t == t and s != t:
                j = JumpRecord(j.t, j.u_left, j.u, j.u, j.left, None)
            if j.u_left == j.u == j.u_right:
                continue
            jumps.append(j)
        if s == t:
            segs = [Segment(np.array([s]), np.array([self.value(s)]))]
            jumps = []
        return VECurve(self.sys, (s, t), segs, jumps, dict(self.meta))


def concatenate(first, second, tol=CURVE_TOL):
    """Join two curves with first.b == second.a and equal values there."""
    a1, b1 = first.interval
    a2, b2 = second.interval
    if abs(b1 - a2) > 1e-12 * (1 + abs(b1)):
        raise MalformedCurve(f"curves do not meet: {b1} vs {a2}")
    u1, u2 = first.value(b1), second.value(a2)
    if abs(u1 - u2) > tol * (1 + abs(u1)):
        raise MalformedCurve(f"values at the junction t={b1} differ: {u1} vs {u2}")
    ja, jb = first._jump_at(b1), second._jump_at(a2)
    jumps = [j for j in first.jumps if j.t != b1] + []
    ul = ja.u_left if ja else u1
    ur = jb.u_right if jb else u2
    if ul != u1 or ur != u1:
        jumps.append(JumpRecord(b1, ul, u1, ur, ja.left if ja else None, jb.right if jb else None))
    jumps += [j for j in second.jumps if j.t != a2]
    segs = list(first.segments)
    if ul == u1 == ur:
        # continuous junction: fuse the two boundary segments
        s1, s2 = segs.pop(), second.segments[0]
        if s1.interp != s2.interp:
            raise MalformedCurve("cannot fuse segments with different interpolation")
        fused = Segment(np.concatenate([s1.times, s2.times[1:]]),
                        np.concatenate([s1.values, s2.values[1:]]), s1.interp)
        segs.append(fused)
        segs += second.segments[1:]
    else:
        segs += second.segments
    return VECurve(first.sys, (a1, b2), segs, jumps, dict(first.meta))


# ---------------------------------------------------------------------------
# variation, cost and balance

def total_variation_psi(obj, s=None, t=None):
    """Psi-variation of a curve or discrete solution over [s, t] (sup over samples)."""
    if isinstance(obj, DiscreteSolution):
        tt, U = obj.times, obj.values
        s = tt[0] if s is None else s
        t = tt[-1] if t is None else t
        if s > t:
            raise ValidationError("total variation needs s <= t")
        m = (tt >= s) & (tt <= t)
        return float(np.sum(obj.sys.psi(np.diff(U[m]))))
    a, b = obj.interval
    s = a if s is None else s
    t = b if t is None else t
    if s > t:
        raise ValidationError("total variation needs s <= t")
    c = obj.restrict(s, t)
    psi = obj.sys.psi
    v = sum(float(np.sum(psi(np.diff(seg.values)))) for seg in c.segments)
    for j in c.jumps:
        v += float(psi(j.u - j.u_left)) + float(psi(j.u_right - j.u))
    return v


def jump_increment(sys, t, u0, u1, tr=None):
    """Two-point increment: cost of the optimal transition minus Psi(u1 - u0)."""
    if u0 == u1:
        return 0.0
    if tr is None:
        cost, tr = jump_cost(sys, t, u0, u1)
    else:
        cost = transition_cost(sys, tr).total
    return float(cost - sys.psi(u1 - u0))


def three_point_increment(sys, jump):
    """Jump increment at (u_l, u, u_r): sum of the two two-point increments."""
    return sum(jump_increment(sys, jump.t, a, b, tr) for a, b, tr in jump.halves())


@dataclass(frozen=True)
class AugmentedVariation:
    var_psi: float
    jump_increment: float

    @property
    def total(self):
        return self.var_psi + self.jump_increment


def augmented_variation(sys, curve, s=None, t=None):
    a, b = curve.interval
    s = a if s is None else s
    t = b if t is None else t
    if s > t:
        raise ValidationError("augmented variation needs s <= t")
    c = curve.restrict(s, t)
    var = total_variation_psi(c)
    inc = sum(three_point_increment(sys, j) for j in c.jumps)
    return AugmentedVariation(var, float(inc))


@dataclass(frozen=True)
class BalanceReport:
    var_psi: float
    jump_increment: float
    work_integral: float
    defect: float  # E(b) + Var_{Psi,c} - E(a) - work


def _ell_int(ell, lo, hi):
    # composite Simpson per cell: exact for cubic loadings
    mid = 0.5 * (lo + hi)
    return (hi - lo) / 6.0 * (ell.value(lo) + 4.0 * ell.value(mid) + ell.value(hi))


def work_integral(sys, curve):
    """Integral of P(s, u(s)) = -l'(s) u(s) over the curve's interval."""
    ell = sys.ell
    total = 0.0
    for seg in curve.segments:
        if seg.times.size < 2:
            continue
        lo, hi = seg.times[:-1], seg.times[1:]
        u0 = seg.values[:-1]
        la, lb = np.asarray(ell.value(lo), dtype=float), np.asarray(ell.value(hi), dtype=float)
        part = u0 * (lb - la)
        if seg.interp == "linear":
            m = (seg.values[1:] - u0) / (hi - lo)
            part = part + m * ((hi - lo) * lb - _ell_int(ell, lo, hi))
        total -= float(np.sum(part))
    return total


def energy_balance(sys, curve):
    a, b = curve.interval
    av = augmented_variation(sys, curve)
    w = work_integral(sys, curve)
    e_b = float(sys.energy(b, curve.value(b)))
    e_a = float(sys.energy(a, curve.value(a)))
    return BalanceReport(av.var_psi, av.jump_increment, w, e_b + av.total - e_a - w)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class VEReport:
    passed: bool
    stability_ok: bool
    stability_worst: float
    equation_ok: bool
    equation_worst: float
    jump_conditions_ok: bool
    jump_identity_ok: bool
    jump_identity_worst: float
    balance: BalanceReport
    balance_ok: bool
    energy_range: float
    violations: tuple = ()


def _sample_indices(n, m):
    if n <= m:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, m).round().astype(int))


def validate_ve(sys, curve, checks="abcde", stability_tol=1e-6, equation_tol=1e-6,
                jump_tol=1e-7, balance_tol=1e-5, max_samples=400, recompute=False):
    """Check a curve against the visco-energetic characterization.

    (a) stability at sampled non-jump times, (b) W'(u) = l - a_plus (resp.
    l + a_minus) where u increases (resp. decreases), (c) the jump
    inequalities over each jump interval, (d) energy drop = cost for the
    attached transitions, (e) the energy balance with the augmented
    variation; its defect is compared with balance_tol * (1 + E range).
    """
    viol = []
    ts, us = curve.samples()
    jt = np.array([j.t for j in curve.jumps])
    ell = np.asarray(sys.ell.value(ts), dtype=float) + 0.0 * ts
    E = np.asarray(sys.energy(ts, us), dtype=float) + 0.0 * ts
    e_range = float(np.max(E) - np.min(E)) if E.size else 0.0
    ap, am = sys.psi.alpha_plus, sys.psi.alpha_minus

    stab_ok, stab_worst = True, 0.0
    if "a" in checks:
        away = np.ones(ts.size, dtype=bool)
        if jt.size:
            away = np.min(np.abs(ts[:, None] - jt[None, :]), axis=1) > 0
        idx = np.flatnonzero(away)
        idx = idx[_sample_indices(idx.size, max_samples)]
        if idx.size:
            wir = slopes_batch(sys, us[idx], "ir")
            wsl = slopes_batch(sys, us[idx], "sl")
            m_ir = ap - (ell[idx] - wir)
            m_sl = ell[idx] - wsl + am
            worst = np.minimum(m_ir, m_sl)
            stab_worst = float(np.min(worst))
            if stab_worst < -stability_tol:
                k = idx[int(np.argmin(worst))]
                stab_ok = False
                viol.append(f"(a) stability fails at t={ts[k]:.9g}, u={us[k]:.9g} by {-stab_worst:.3e}")

    eq_ok, eq_worst = True, 0.0
    if "b" in checks:
        wp = sys.W.deriv(us)
        off = 0
        for seg in curve.segments:
            n = seg.times.size
            if n > 1 and seg.interp == "linear":
                d = np.diff(seg.values)
                k = np.arange(1, n) + off
                up = d > MOVE_TOL * (1 + np.abs(seg.values[1:]))
                dn = d < -MOVE_TOL * (1 + np.abs(seg.values[1:]))
                err = np.concatenate([np.abs(wp[k[up]] - (ell[k[up]] - ap)),
                                      np.abs(wp[k[dn]] - (ell[k[dn]] + am))])
                if err.size:
                    eq_worst = max(eq_worst, float(np.max(err)))
            off += n
        if eq_worst > equation_tol:
            eq_ok = False
            viol.append(f"(b) W'(u) misses the moving threshold by {eq_worst:.3e}")

    jc_ok = True
    if "c" in checks:
        for j in curve.jumps:
            for u0, u1, _ in j.halves():
                if u0 == u1:
                    continue
                try:
                    check_jump_conditions(sys, j.t, u0, u1)
                except JumpConditionViolation as exc:
                    jc_ok = False
                    viol.append(f"(c) jump at t={j.t:.9g}: {exc}")

    ji_ok, ji_worst = True, 0.0
    if "d" in checks:
        for j in curve.jumps:
            for u0, u1, tr in j.halves():
                if u0 == u1:
                    continue
                if tr is None:
                    try:
                        _, tr = jump_cost(sys, j.t, u0, u1)
                    except Exception as exc:  # report-based: never raise
                        ji_ok = False
                        viol.append(f"(d) no transition at t={j.t:.9g}: {exc}")
                        continue
                rep = certify_optimal(sys, tr, recompute=recompute, tol=jump_tol)
                ji_worst = max(ji_worst, rep.drop_defect)
                if not rep.certified:
                    ji_ok = False
                    viol.append(f"(d) jump at t={j.t:.9g}: " + "; ".join(rep.violations))

    bal, bal_ok = None, True
    if "e" in checks:
        bal = energy_balance(sys, curve)
        if abs(bal.defect) > balance_tol * (1 + e_range):
            bal_ok = False
            viol.append(f"(e) energy balance defect {bal.defect:.3e}")
    passed = not viol
    return VEReport(passed, stab_ok, stab_worst, eq_ok, eq_worst, jc_ok, ji_ok, ji_worst,
                    bal, bal_ok, e_range, tuple(viol))


def check_restriction_concatenation(sys, curve, split_times, **kwargs):
    """True iff validation of the whole curve agrees with validation of the
    pieces and the pieces concatenate back to the same curve."""
    a, b = curve.interval
    cuts = sorted(float(s) for s in split_times)
    if any(not a < s < b for s in cuts):
        raise ValidationError("split times must be interior")
    edges = [a] + cuts + [b]
    pieces = [curve.restrict(s, t) for s, t in zip(edges, edges[1:])]
    whole = validate_ve(sys, curve, **kwargs).passed
    parts = all(validate_ve(sys, p, **kwargs).passed for p in pieces)
    glued = pieces[0]
    for p in pieces[1:]:
        glued = concatenate(glued, p)
    ts, us = curve.samples()
    same = np.allclose(glued(ts), curve(ts), rtol=0, atol=1e-12)
    return bool(same and whole == parts)


# ---------------------------------------------------------------------------
# branches of the limit equation

def _ddw_boundaries(W, lo, hi):
    eta = 1e-9
    out = []
    for p in W.slope_stationary_points(lo, hi):
        if min(W.second(p - eta), W.second(p + eta), W.second(p)) <= 1e-12:
            out.append(p)
    return out


@dataclass
class _Branch:
    """u(t) solving W'(u) = l(t) - a_plus (up), = l(t) + a_minus (down), or
    u constant (stuck), inside the W'' > 0 component around the anchor."""
    sys: object
    kind: str
    anchor: float
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind == "stuck":
            return
        W = self.sys.W
        blo, bhi = self.sys.W.bound * -1, self.sys.W.bound
        from .numerics import coercive_bracket
        clo, chi = coercive_bracket(self.sys, self.anchor)
        blo, bhi = max(blo, clo), min(bhi, chi)
        bnd = _ddw_boundaries(W, blo, bhi)
        self.lo = max([p for p in bnd if p < self.anchor], default=blo)
        self.hi = min([p for p in bnd if p > self.anchor], default=bhi)

    def level(self, t):
        ell = float(self.sys.ell.value(t))
        return ell - self.sys.psi.alpha_plus if self.kind == "up" else ell + self.sys.psi.alpha_minus

    def reach(self, t):
        """>= 0 iff the branch exists at t."""
        if self.kind == "stuck":
            return 1.0
        L, W = self.level(t), self.sys.W
        return min(L - W.deriv(self.lo), W.deriv(self.hi) - L)

    def __call__(self, t):
        if self.kind == "stuck":
            return self.anchor
        L, W = self.level(t), self.sys.W
        flo, fhi = W.deriv(self.lo) - L, W.deriv(self.hi) - L
        if flo > 0 or fhi < 0:
            return None
        if flo == 0:
            return self.lo
        if fhi == 0:
            return self.hi
        return brentq(lambda u: W.deriv(u) - L, self.lo, self.hi, xtol=1e-15, rtol=1e-15)

    def stable(self, t):
        u = self(t)
        if u is None:
            return False
        e = float(self.sys.energy(t, u))
        return residual(self.sys, t, u).value <= BRANCH_STABILITY_TOL * (1 + abs(e))


def _branch_kind(d, scale):
    moving = np.abs(d) > MOVE_TOL * (1 + scale)
    if not np.any(moving):
        return "stuck"
    s = np.sum(d[moving])
    return "up" if s > 0 else "down"


def _bisect_time(pred, t_ok, t_bad, tol=1e-14):
    while t_bad - t_ok > tol * (1 + abs(t_ok)):
        mid = 0.5 * (t_ok + t_bad)
        if pred(mid):
            t_ok = mid
        else:
            t_bad = mid
    return t_ok, t_bad


def _polish_jump(sys, T, U, i_pre, i_post, probe=3):
    """Jump time and one-sided limits for a cluster of large increments
    between nodes i_pre and i_post of the finest discrete solution."""
    def pre_at(i):
        return _Branch(sys, _branch_kind(np.diff(U[max(i - probe, 0):i + 1]), abs(U[i])), float(U[i]))

    # the scheme lags behind the limit near a fold; step back until the
    # branch through the discrete value still exists and is stable
    pre, i0 = pre_at(i_pre), i_pre
    while i_pre > 0 and i0 - i_pre < 4096 and not (pre.reach(T[i_pre]) >= 0 and pre.stable(T[i_pre])):
        i_pre -= 1
        pre = pre_at(i_pre)
    post = _Branch(sys, _branch_kind(np.diff(U[i_post:i_post + probe + 1]), abs(U[i_post])), float(U[i_post]))
    ta, tb = float(T[i_pre]), float(T[i_post])
    # existence of the pre-jump branch
    t_exist, by_existence = tb, False
    if pre.reach(tb) < 0:
        te, _ = _bisect_time(lambda s: pre.reach(s) >= 0, ta, tb)
        L_end = pre.sys.W.deriv(pre.hi if pre.kind == "up" else pre.lo)
        try:
            te = brentq(lambda s: pre.level(s) - L_end, ta, tb, xtol=1e-15)
        except ValueError:
            pass
        t_exist, by_existence = te, True
    if pre.stable(t_exist) and by_existence:
        t_star = t_exist
        u_l = pre.hi if pre.kind == "up" else pre.lo
    else:
        if not pre.stable(ta):
            t_star, u_l = ta, float(U[i_pre])
        else:
            t_star, _ = _bisect_time(pre.stable, ta, t_exist)
            u_l = pre(t_star)
    u_r = post(t_star)
    if u_r is None:
        u_r = float(U[i_post])
    return t_star, float(u_l), float(u_r), pre, post, i_pre


def _project(sys, T, U, fixed):
    """Fit the discrete values to the limit equation: moving nodes are moved
    onto the root of W'(u) = threshold nearby, stuck nodes copy their
    predecessor. ``fixed`` marks nodes handled elsewhere."""
    W, ap, am = sys.W, sys.psi.alpha_plus, sys.psi.alpha_minus
    V = U.copy()
    d = np.diff(U)
    ell = np.asarray(sys.ell.value(T), dtype=float) + 0.0 * T
    for n in range(1, U.size):
        if fixed[n]:
            continue
        if abs(d[n - 1]) <= MOVE_TOL * (1 + abs(U[n])):
            V[n] = V[n - 1] if not fixed[n - 1] else U[n]
            continue
        L = ell[n] - ap if d[n - 1] > 0 else ell[n] + am
        u = U[n]
        ok = False
        for _ in range(40):
            h = W.second(u)
            if not h > 0:
                break
            step = (W.deriv(u) - L) / h
            u -= step
            if abs(step) <= 1e-15 * (1 + abs(u)):
                ok = True
                break
        if ok and abs(W.deriv(u) - L) <= 1e-10 and abs(u - U[n]) <= max(20 * abs(d[n - 1]), 1e-6):
            V[n] = u
    return V


def _approach(t0, t1, h, depth=40):
    """Times t1 - h 2^-k inside (t0, t1): a branch may leave with infinite
    speed at a jump (fold of W'), which plain uniform samples resolve poorly."""
    d = h * 0.5 ** np.arange(1, depth + 1)
    tt = t1 - d
    # close to t1 successive offsets round to the same float
    return np.unique(tt[(tt > t0) & (tt < t1)])


def _refine_samples(f, tt, vv, du_tol=1e-3, passes=40):
    """Bisect sample cells whose increment exceeds du_tol (f evaluates the
    curve). Keeps the linear interpolant accurate near square-root folds."""
    tt, vv = list(tt), list(vv)
    for _ in range(passes):
        t_new, v_new, grew = [tt[0]], [vv[0]], False
        for k in range(1, len(tt)):
            if abs(vv[k] - vv[k - 1]) > du_tol and tt[k] - tt[k - 1] > 1e-13 * (1 + abs(tt[k])):
                tm = 0.5 * (tt[k - 1] + tt[k])
                um = f(tm)
                if um is not None:
                    t_new.append(tm)
                    v_new.append(um)
                    grew = True
            t_new.append(tt[k])
            v_new.append(vv[k])
        tt, vv = t_new, v_new
        if not grew:
            break
    return np.array(tt), np.array(vv)


def _clusters(U, factor=10.0):
    inc = np.abs(np.diff(U))
    nz = inc[inc > MOVE_TOL * (1 + np.abs(U[1:]))]
    if nz.size == 0:
        return []
    thr = factor * float(np.median(nz))
    flagged = np.flatnonzero(inc > thr)
    out = []
    for k in flagged:
        if out and k - out[-1][1] <= 2:
            out[-1][1] = k
        else:
            out.append([k, k])
    # (first step index, last step index): step k moves U[k] -> U[k+1]
    return [(a, b) for a, b in out]


def cauchy_defect(fine, coarse, exclude=()):
    """Time-averaged |U_fine - U_coarse| at common nodes outside the windows."""
    tf, tc = fine.times, coarse.times
    idx = np.searchsorted(tf, tc)
    idx = np.clip(idx, 0, tf.size - 1)
    common = np.abs(tf[idx] - tc) <= 1e-12 * (1 + np.abs(tc))
    keep = common.copy()
    for lo, hi in exclude:
        keep &= ~((tc >= lo) & (tc <= hi))
    if not np.any(keep):
        return 0.0
    return float(np.mean(np.abs(fine.values[idx[keep]] - coarse.values[keep])))


def extract_limit(sys, u0, levels=4, n0=2048, tie_rule="nearest", cauchy_tol=1e-2,
                  attach_transitions=True, cross_check=False, settings=None):
    """Limit curve from dyadically refined discrete solutions.

    Runs the scheme with N = 2^k * n0 steps for k < levels. Jumps are cells
    where the increment exceeds 10 times the median nonzero increment at the
    finest level and that persist at the next coarser level. Each jump is
    located by continuing the branch before it (constant, or W' = threshold)
    up to the last time it exists and stays stable; the branch after it is
    continued back to that time. Elsewhere the finest samples are fitted to
    the limit equation. Raises NonConvergence (with the curve attached) when
    the Cauchy defect between the two finest levels exceeds ``cauchy_tol``.
    """
    levels = as_positive_int(levels, "levels")
    if levels < 3:
        raise ValidationError("extract_limit needs at least 3 refinement levels")
    a, b = sys.interval
    part = Partition.uniform(a, b, int(n0))
    sols = []
    for k in range(levels):
        sols.append(ims_solve(sys, part, u0, tie_rule, settings))
        part = part.refine()
    fine, coarse = sols[-1], sols[-2]
    T, U = fine.times, fine.values
    cf, cc = _clusters(U), _clusters(coarse.values)
    tau_c = coarse.partition.max_step
    cwin = [(coarse.times[p], coarse.times[q + 1]) for p, q in cc]

    jumps, windows, fixed = [], [], np.zeros(U.size, dtype=bool)
    pre_branch = {}
    V = U.copy()
    for p, q in cf:
        lo, hi = T[p], T[q + 1]
        if not any(clo - 2 * tau_c <= hi and chi + 2 * tau_c >= lo for clo, chi in cwin):
            continue  # steep but continuous: not persistent
        i_pre, i_post = max(p - 3, 0), min(q + 4, U.size - 1)
        while i_pre > 0 and sys.W.second(U[i_pre]) <= 0:
            i_pre -= 1
        t_star, u_l, u_r, pre, post, i_pre = _polish_jump(sys, T, U, i_pre, i_post)
        for n in range(i_pre + 1, i_post):
            br = pre if T[n] <= t_star else post
            val = br(T[n])
            V[n] = val if val is not None else U[n]
            fixed[n] = True
        jumps.append((t_star, u_l, u_r))
        pre_branch[t_star] = pre
        windows.append((T[i_pre], T[i_post]))
    fixed[0] = True
    V = np.where(fixed, V, _project(sys, T, np.where(fixed, V, U), fixed))

    # Cauchy evidence between consecutive levels, jump windows excluded
    excl = [(lo - 4 * tau_c, hi + 4 * tau_c) for lo, hi in windows + cwin]
    defects = [cauchy_defect(f, c, excl) for c, f in zip(sols[:-1], sols[1:])]

    records, segs = [], []
    start_t, start_u = float(T[0]), float(V[0])
    for t_star, u_l, u_r in jumps:
        m = (T > start_t) & (T < t_star)
        extra = _approach(max(start_t, float(T[m][-1]) if np.any(m) else start_t), t_star, fine.partition.max_step)
        pre_vals = [pre_branch[t_star](x) for x in extra]
        keep = np.array([v is not None for v in pre_vals], dtype=bool)
        tt = np.concatenate([[start_t], T[m], extra[keep], [t_star]])
        vv = np.concatenate([[start_u], V[m], np.array([v for v in pre_vals if v is not None], dtype=float), [u_l]])
        lo_w = windows[len(segs)][0]
        w = tt >= lo_w
        if np.count_nonzero(w) > 1:
            # refine only inside the jump window, where the branch is known
            tw, vw = _refine_samples(pre_branch[t_star], tt[w], vv[w])
            tt, vv = np.concatenate([tt[~w], tw]), np.concatenate([vv[~w], vw])
        segs.append(Segment(tt, vv))
        left = Transition(t_star, (u_l,), (), None, (0.0,), "constructive", {"cases": ()})
        right = None
        meta = {}
        if attach_transitions:
            try:
                right = build_optimal_transition(sys, t_star, u_l, u_r, settings, cross_check=cross_check)
            except (JumpConditionViolation, ChainDivergence) as exc:
                meta["transition_error"] = str(exc)
        rec = JumpRecord(t_star, u_l, u_l, u_r, left, right)
        records.append(rec)
        start_t, start_u = t_star, u_r
    m = T > start_t
    if start_t >= T[-1]:
        segs.append(Segment(np.array([start_t]), np.array([start_u])))
    else:
        segs.append(Segment(np.concatenate([[start_t], T[m]]), np.concatenate([[start_u], V[m]])))
    meta = {"source": "extract_limit", "levels": levels, "n0": int(n0), "tau": fine.partition.max_step,
            "cauchy_defects": tuple(defects), "cauchy_defect": defects[-1], "tie_rule": tie_rule,
            "jump_windows": tuple(windows), "multiplicity": int(np.sum(fine.multiple)),
            "discrete": fine}
    curve = VECurve(sys, (float(a), float(b)), segs, records, meta)
    if defects[-1] > cauchy_tol:
        raise NonConvergence(f"Cauchy defect {defects[-1]:.3e} between the two finest levels "
                             f"exceeds {cauchy_tol:.1e}", curve=curve)
    return curve


# ---------------------------------------------------------------------------
# monotone loading

def _plateau_spans(env, min_width=1e-6, tol=1e-11):
    """(level, start, end) of flat stretches of the envelope, in the direction
    of motion; start is the first grid point carrying the plateau level."""
    x, vals = env._x, env.sign * env.values
    if env.sign < 0:
        vals = vals[::-1]
    out, i, n = [], 0, len(x)
    while i < n - 1:
        j = i
        while j + 1 < n and vals[j + 1] <= vals[i] + tol:
            j += 1
        if j > i and x[j] - x[i] > min_width:
            out.append((env.sign * float(vals[i]), env.sign * float(x[i]), env.sign * float(x[j])))
        i = j + 1 if j > i else i + 1
    return out


def _selection(env, L):
    """Current selection at level L: p_l (upper side) or q_r (lower side).

    Fast path: where the corrected slope equals W' on both ends of the
    grid cell, the root of W' = L there is computed directly.
    """
    sg, W = env.sign, env.sys.W
    lev = sg * L
    s, x = env._s, env._x
    hit = np.flatnonzero(s >= lev - 1e-11)
    if hit.size == 0:
        return env.p_left(L) if sg > 0 else env.p_right(L)
    k = int(hit[0])
    if k == 0:
        return sg * float(x[0])
    xa, xb = float(x[k - 1]), float(x[k])

    def g(xx):
        return sg * W.deriv(sg * xx) - lev

    on_branch = abs(s[k - 1] - sg * W.deriv(sg * xa)) <= 1e-10 and abs(s[k] - sg * W.deriv(sg * xb)) <= 1e-10
    if on_branch and g(xa) < 0 <= g(xb):
        if g(xb) == 0:
            return sg * xb
        return sg * brentq(g, xa, xb, xtol=1e-15, rtol=1e-15)
    return env.p_left(L) if sg > 0 else env.p_right(L)


def _far_end(env, level, _hint=None):
    """p_r (upper) or q_l (lower) at a plateau level, snapped to W' = level
    when the slope coincides with W' around it."""
    u = env.p_right(level) if env.sign > 0 else env.p_left(level)
    W = env.sys.W
    h = 1e-6
    lo, hi = u - h, u + h
    try:
        f = lambda v: W.deriv(v) - level
        if f(lo) * f(hi) < 0 and W.second(u) > 0:
            r = brentq(f, lo, hi, xtol=1e-15)
            sl = float(slopes_batch(env.sys, np.array([r]), "ir" if env.sign > 0 else "sl")[0])
            if abs(sl - W.deriv(r)) <= 1e-10:
                return r
    except ValueError:
        pass
    return u


def solve_monotone(sys, u0, direction=None, samples=2049, attach_transitions=True, settings=None):
    """Closed-form solution for monotone loading via the monotone envelopes.

    Increasing load: u(t) = u0 while l(t) - a_plus <= W'_ir(u0), then the
    smallest contact point p_l(l(t) - a_plus); jumps sit at the plateau
    levels, from the plateau start to p_r. Decreasing loads use the running
    min of W'_sl and q_r, q_l. Points where the extra condition
    W'_sl(u) - a_minus <= W'(u) (resp. its mirror) fails are reported in
    ``meta["theorem_violations"]``, not corrected.
    """
    a, b = sys.interval
    mono = sys.ell.is_monotone()
    if direction is None:
        direction = mono if mono != 0 else None
    if direction not in (1, -1):
        raise PreconditionViolation("solve_monotone needs a monotone loading")
    if mono not in (0, direction) or mono == 0:
        raise PreconditionViolation("the loading is not monotone in the requested direction")
    u0 = as_real(u0, "u0")
    ap, am = sys.psi.alpha_plus, sys.psi.alpha_minus
    ell = sys.ell
    w_sl0 = float(slopes_batch(sys, np.array([u0]), "sl")[0])
    w_ir0 = float(slopes_batch(sys, np.array([u0]), "ir")[0])
    if direction > 0:
        if ell.value(a) < w_sl0 - am - 1e-9:
            raise InitialConditionViolation(
                f"l(a)={ell.value(a):.9g} < W'_sl(u0) - a_minus = {w_sl0 - am:.9g}")
        env = build_envelope(sys, u0, "upper_of_ir")
        level = lambda t: float(ell.value(t)) - ap
        m0 = w_ir0
        below = lambda L: L <= m0
    else:
        if ell.value(a) > w_ir0 + ap + 1e-9:
            raise InitialConditionViolation(
                f"l(a)={ell.value(a):.9g} > W'_ir(u0) + a_plus = {w_ir0 + ap:.9g}")
        env = build_envelope(sys, u0, "lower_of_sl")
        level = lambda t: float(ell.value(t)) + am
        m0 = w_sl0
        below = lambda L: L >= m0

    def u_of(L):
        return u0 if below(L) else _selection(env, L)

    La, Lb = level(a), level(b)
    jumps = []
    if not below(La) or abs(La - m0) <= 1e-14:
        # already at (or beyond) the threshold: possible jump at t = a
        ur = _far_end(env, La, None)
        if abs(ur - u0) > 1e-9:
            jumps.append((float(a), u0, ur))
    for Lp, start, end in _plateau_spans(env):
        ahead = (Lp - La) * direction
        if ahead <= 1e-14 or (Lp - Lb) * direction >= 0:
            continue
        ts = brentq(lambda t: level(t) - Lp, a, b, xtol=1e-15)
        ur = _far_end(env, Lp, end)
        if abs(ur - start) > 1e-12:
            jumps.append((ts, start, ur))

    grid = np.linspace(a, b, int(samples))
    records, segs = [], []
    start_t, start_u = float(a), float(u0)
    for ts, ul, ur in jumps:
        if ts > start_t:
            m = (grid > start_t) & (grid < ts)
            tt = np.union1d(grid[m], _approach(start_t, ts, grid[1] - grid[0]))
            tt = np.concatenate([[start_t], tt, [ts]])
            vv = np.array([start_u] + [u_of(level(t)) for t in tt[1:-1]] + [ul])
            tt, vv = _refine_samples(lambda t: u_of(level(t)), tt, vv)
            segs.append(Segment(tt, vv))
        left = Transition(ts, (ul,), (), None, (0.0,), "constructive", {"cases": ()})
        right = None
        if attach_transitions:
            try:
                right = build_optimal_transition(sys, ts, ul, ur, settings, cross_check=False)
            except (JumpConditionViolation, ChainDivergence):
                right = None
        records.append(JumpRecord(ts, ul, ul, ur, left, right))
        start_t, start_u = ts, ur
    m = grid > start_t
    tt = np.concatenate([[start_t], grid[m]])
    vv = np.array([start_u] + [u_of(level(t)) for t in grid[m]])
    segs.append(Segment(*_refine_samples(lambda t: u_of(level(t)), tt, vv)))

    # the extra envelope condition, sampled
    allv = np.concatenate([s.values for s in segs])
    if direction > 0:
        extra = slopes_batch(sys, allv, "sl") - am - sys.W.deriv(allv)
    else:
        extra = sys.W.deriv(allv) - (slopes_batch(sys, allv, "ir") + ap)
    tall = np.concatenate([s.times for s in segs])
    bad = tall[extra > 1e-8]
    meta = {"source": "solve_monotone", "direction": direction, "envelope": env,
            "theorem_violations": tuple(float(t) for t in bad)}
    return VECurve(sys, (float(a), float(b)), segs, records, meta)


__all__ = [
    "Partition", "DiscreteSolution", "Segment", "JumpRecord", "VECurve", "BalanceReport",
    "AugmentedVariation", "VEReport", "TIE_RULES", "ims_solve", "extract_limit", "solve_monotone",
    "validate_ve", "total_variation_psi", "augmented_variation", "energy_balance", "work_integral",
    "jump_increment", "three_point_increment", "concatenate", "check_restriction_concatenation",
    "cauchy_defect",
]
