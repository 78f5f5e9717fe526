"""delta-corrected one-sided global slopes and the 1D stability chain.

With V(u, z) = (W(z) - W(u) + delta(u, z)) / (z - u) and V(u, u) = W'(u),

    W'_ir(u) = min over z >= u of V(u, z),
    W'_sl(u) = max over z <= u of V(u, z),

both truncated to the coercive bracket around u.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolation
from .numerics import DEFAULT_SETTINGS, INVPHI, coercive_bracket, global_min

STABILITY_TOL = 1e-8
GAP_TOL = 1e-8


def slope_quotient(sys, u, z):
    """V(u, z); works elementwise on arrays and is exact-ish near z == u."""
    return sys.W.divided_difference(u, z) + sys.delta.ratio(u, z, sys.psi)


@dataclass(frozen=True)
class SlopePair:
    w_ir: float
    w_sl: float
    arg_ir: float = None
    arg_sl: float = None


def _one_sided(sys, u, sign, settings):
    s = settings or DEFAULT_SETTINGS
    u = float(u)
    lo, hi = coercive_bracket(sys, u)
    W, delta, psi = sys.W, sys.delta, sys.psi

    def obj(z):
        return sign * slope_quotient(sys, u, z)

    def dobj(z):
        h = z - u
        if h * sign <= 0:
            return 0.0
        v = slope_quotient(sys, u, z)
        return sign * (W.deriv(z) + delta.dv(u, z, psi) - v) / h

    a, b = (u, hi) if sign > 0 else (lo, u)
    res = global_min(obj, a, b, s, extra_points=(u,), deriv=dobj)
    value = sign * res.min_value
    detached = [m for m in res.minimizers if abs(m - u) > 10 * s.refine_tol]
    arg = min(detached, key=lambda m: (abs(m - u), m)) if detached else None
    return float(value), arg


def slope_ir(sys, u, settings=None):
    """(W'_ir(u), arg); arg is the closest detached minimizing z > u or None."""
    return _one_sided(sys, u, 1.0, settings)


def slope_sl(sys, u, settings=None):
    """(W'_sl(u), arg); mirror of slope_ir over z < u."""
    return _one_sided(sys, u, -1.0, settings)


def slope_pair(sys, u, settings=None):
    wi, ai = slope_ir(sys, u, settings)
    ws, as_ = slope_sl(sys, u, settings)
    return SlopePair(wi, ws, ai, as_)


def _dquot(sys, u, z, sign):
    # sign * d/dz V(u, z); NaN-free, 0 where z is on the wrong side of u
    h = z - u
    good = h * sign > 0
    hs = np.where(good, h, 1.0)
    v = slope_quotient(sys, u, z)
    d = (sys.W.deriv(z) + sys.delta.dv(u, z, sys.psi) - v) / hs
    return np.where(good, sign * d, 0.0)


def slopes_batch(sys, u, side="ir", grid_points=4096, tol=1e-11, iters=60):
    """Vectorized W'_ir (side="ir") or W'_sl (side="sl") on an array of states.

    Each row scans z on a uniform grid between u and the bracket end, keeps
    the best discrete local minima (plus the exact z = u candidate) and
    refines them all at once by golden section.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sign = 1.0 if side == "ir" else -1.0
    out = np.empty_like(u)
    s = np.linspace(0.0, 1.0, grid_points)
    chunk = max(1, 2 ** 20 // grid_points)
    for start in range(0, u.size, chunk):
        uu = u[start:start + chunk]
        ends = np.array([coercive_bracket(sys, float(x))[1 if sign > 0 else 0] for x in uu])
        span = ends - uu
        Z = uu[:, None] + span[:, None] * s[None, :]
        U = np.broadcast_to(uu[:, None], Z.shape)
        Y = sign * slope_quotient(sys, U, Z)
        Y[:, 0] = sign * sys.W.deriv(uu)
        best = Y.min(axis=1)
        left = np.concatenate([np.full((len(uu), 1), np.inf), Y[:, :-1]], axis=1)
        right = np.concatenate([Y[:, 1:], np.full((len(uu), 1), np.inf)], axis=1)
        near = 1e-6 * (1.0 + np.abs(best))
        cand = (Y <= left) & (Y <= right) & (Y <= (best + near)[:, None])
        rows, cols = np.nonzero(cand)
        ga = np.clip(cols - 1, 0, grid_points - 1)
        gb = np.clip(cols + 1, 0, grid_points - 1)
        ur = uu[rows]
        a = ur + span[rows] * s[ga]
        b = ur + span[rows] * s[gb]
        a, b = np.minimum(a, b), np.maximum(a, b)
        a0, b0 = a.copy(), b.copy()
        c = b - INVPHI * (b - a)
        d = a + INVPHI * (b - a)
        fc = sign * slope_quotient(sys, ur, c)
        fd = sign * slope_quotient(sys, ur, d)
        for _ in range(iters):
            if np.all(b - a <= tol * (1 + np.abs(a))):
                break
            m = fc <= fd
            b2 = np.where(m, d, b)
            a2 = np.where(m, a, c)
            c2 = np.where(m, b2 - INVPHI * (b2 - a2), d)
            d2 = np.where(m, c, a2 + INVPHI * (b2 - a2))
            fc2 = np.where(m, sign * slope_quotient(sys, ur, c2), fd)
            fd2 = np.where(m, fc, sign * slope_quotient(sys, ur, d2))
            a, b, c, d, fc, fd = a2, b2, c2, d2, fc2, fd2
        refined = np.minimum(fc, fd)
        # golden section stalls near sqrt(eps) on flat minima; bisect dV = 0
        # where it is bracketed away from z == u
        dva = _dquot(sys, ur, a0, sign)
        dvb = _dquot(sys, ur, b0, sign)
        ok = (dva < 0) & (dvb > 0)
        if np.any(ok):
            lo_, hi_, uo = a0[ok], b0[ok], ur[ok]
            for _ in range(60):
                mid = 0.5 * (lo_ + hi_)
                neg = _dquot(sys, uo, mid, sign) < 0
                lo_ = np.where(neg, mid, lo_)
                hi_ = np.where(neg, hi_, mid)
            root = 0.5 * (lo_ + hi_)
            refined[ok] = np.minimum(refined[ok], sign * slope_quotient(sys, uo, root))
        rowbest = best.copy()
        np.minimum.at(rowbest, rows, refined)
        out[start:start + chunk] = sign * rowbest
    return out


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    margin_sl: float  # (l - W'_sl) + a_minus, must be >= 0
    order_sl: float  # W'_sl - W', must be >= 0
    order_ir: float  # W' - W'_ir, must be >= 0
    margin_ir: float  # a_plus - (l - W'_ir), must be >= 0
    w_ir: float
    w_sl: float
    w_prime: float


def check_stability_1d(sys, t, u, settings=None, tol=STABILITY_TOL, pair=None):
    p = pair or slope_pair(sys, u, settings)
    ell = float(sys.ell.value(t))
    wp = float(sys.W.deriv(u))
    m_sl = ell - p.w_sl + sys.psi.alpha_minus
    o_sl = p.w_sl - wp
    o_ir = wp - p.w_ir
    m_ir = sys.psi.alpha_plus - (ell - p.w_ir)
    ok = min(m_sl, o_sl, o_ir, m_ir) >= -tol
    return StabilityVerdict(bool(ok), m_sl, o_sl, o_ir, m_ir, p.w_ir, p.w_sl, wp)


def monotone_decrease_certificate(sys, interval, side="ir", samples=256, settings=None):
    """True iff the slope on ``side`` is strictly decreasing over the open interval.

    Requires W'_ir < W' - 1e-8 (side "ir") or W'_sl > W' + 1e-8 (side "sl")
    at every sample; otherwise raises PreconditionViolation.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if samples < 256:
        samples = 256
    v = np.linspace(lo, hi, samples + 2)[1:-1]
    fn = slope_ir if side == "ir" else slope_sl
    vals = np.array([fn(sys, x, settings)[0] for x in v])
    wp = sys.W.deriv(v)
    gap = (wp - vals) if side == "ir" else (vals - wp)
    bad = np.flatnonzero(gap <= GAP_TOL)
    if bad.size:
        k = bad[0]
        raise PreconditionViolation(
            f"strict slope gap fails at v={v[k]:.6g}: gap {gap[k]:.3e} <= {GAP_TOL}"
        )
    return bool(np.all(np.diff(vals) < 0))


def stability_margins_grid(sys, t, u, settings=None):
    """Convenience: (margin_ir, margin_sl) arrays on a state grid at time t."""
    u = np.asarray(u, dtype=float)
    wi = slopes_batch(sys, u, "ir")
    ws = slopes_batch(sys, u, "sl")
    ell = float(sys.ell.value(t))
    return sys.psi.alpha_plus - (ell - wi), ell - ws + sys.psi.alpha_minus


__all__ = [
    "SlopePair", "StabilityVerdict", "slope_quotient", "slope_ir", "slope_sl", "slope_pair",
    "slopes_batch", "check_stability_1d", "monotone_decrease_certificate",
    "stability_margins_grid",
]
