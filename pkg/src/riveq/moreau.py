"""Moreau-Yosida regularization Y(t, u) = min_v E(t, v) + D(u, v), the minimal
set M(t, u), the residual R = E - Y and the definition-level stability test."""

from dataclasses import dataclass

import numpy as np

from .numerics import ArgminSet, coercive_bracket, global_min

RESIDUAL_CLAMP = 1e-10


@dataclass(frozen=True)
class ResidualValue:
    value: float
    witness: float = None


def incremental_objective(sys, t, u):
    ell = sys.ell.value(t)
    W, psi, delta = sys.W, sys.psi, sys.delta

    def g(v):
        return W.value(v) - ell * v + psi(v - u) + delta.value(u, v, psi)

    return g


def incremental_derivative(sys, t, u):
    """One-sided derivative of v -> E(t, v) + D(u, v), right-sided at v = u."""
    ell = sys.ell.value(t)
    W, psi, delta = sys.W, sys.psi, sys.delta
    ap, am = psi.alpha_plus, psi.alpha_minus

    def dg(v):
        side = ap if v >= u else -am
        return W.deriv(v) - ell + side + delta.dv(u, v, psi)

    return dg


def moreau_yosida(sys, t, u, settings=None):
    """Return (Y(t, u), M(t, u)).

    The value at v = u is always evaluated exactly; a refined minimizer that
    lands within refine_tol of u is snapped onto u.
    """
    u = float(u)
    g = incremental_objective(sys, t, u)
    lo, hi = coercive_bracket(sys, u)
    res = global_min(g, lo, hi, settings, extra_points=(u,), deriv=incremental_derivative(sys, t, u))
    tol = 10 * (settings.refine_tol if settings else 1e-10)
    mins = tuple(sorted({u if abs(m - u) <= tol else m for m in res.minimizers}))
    return float(res.min_value), ArgminSet(mins, res.min_value)


def stability_tolerance(sys, t, u):
    return 1e-9 * (1.0 + abs(float(sys.energy(t, u))))


def pick_nearest(points, u, direction=0):
    """Element closest to u, leftmost on ties.

    direction > 0 (resp. < 0) restricts to points >= u (resp. <= u) first.
    """
    pts = list(points)
    if direction > 0:
        ahead = [p for p in pts if p >= u]
        pts = ahead or pts
    elif direction < 0:
        ahead = [p for p in pts if p <= u]
        pts = ahead or pts
    return min(pts, key=lambda p: (abs(p - u), p))


def residual(sys, t, u, settings=None):
    u = float(u)
    y, mset = moreau_yosida(sys, t, u, settings)
    e = float(sys.energy(t, u))
    r = e - y
    if r < 0 or r <= RESIDUAL_CLAMP:
        r = max(r, 0.0) if r > -RESIDUAL_CLAMP else 0.0
    others = [m for m in mset.minimizers if m != u]
    witness = pick_nearest(others, u) if (r > 0 and others) else None
    return ResidualValue(float(r), witness)


def is_stable_by_definition(sys, t, u, tol=None, settings=None):
    if tol is None:
        tol = stability_tolerance(sys, t, u)
    return residual(sys, t, u, settings).value <= tol


def residuals_batch(sys, t, u, grid_points=4096, iters=60):
    """Vectorized R(t, u) over an array of states (values only).

    Same recipe as the scalar path: uniform grid over each state's coercive
    bracket, the exact v = u candidate, and vectorized golden refinement of
    the near-best discrete minima.
    """
    from .numerics import INVPHI

    u = np.atleast_1d(np.asarray(u, dtype=float))
    ell = float(sys.ell.value(t))
    W, psi, delta = sys.W, sys.psi, sys.delta
    out = np.empty_like(u)
    s = np.linspace(0.0, 1.0, grid_points)
    chunk = max(1, 2 ** 21 // grid_points)

    def G(uu, v):
        return W.value(v) - ell * v + psi(v - uu) + delta.value(uu, v, psi)

    for start in range(0, u.size, chunk):
        uu = u[start:start + chunk]
        br = np.array([coercive_bracket(sys, float(x)) for x in uu])
        lo, span = br[:, 0], br[:, 1] - br[:, 0]
        V = lo[:, None] + span[:, None] * s[None, :]
        Y = G(uu[:, None], V)
        e = W.value(uu) - ell * uu
        best = np.minimum(Y.min(axis=1), e)
        left = np.concatenate([np.full((len(uu), 1), np.inf), Y[:, :-1]], axis=1)
        right = np.concatenate([Y[:, 1:], np.full((len(uu), 1), np.inf)], axis=1)
        near = 1e-6 * (1.0 + np.abs(best))
        cand = (Y <= left) & (Y <= right) & (Y <= (best + near)[:, None])
        rows, cols = np.nonzero(cand)
        a = lo[rows] + span[rows] * s[np.clip(cols - 1, 0, grid_points - 1)]
        b = lo[rows] + span[rows] * s[np.clip(cols + 1, 0, grid_points - 1)]
        # shallow minima hugging the kink at v = u hide below the grid; give
        # each side of u its own bracket two cells wide
        cell = 2.0 * span / (grid_points - 1)
        idx = np.arange(len(uu))
        rows = np.concatenate([rows, idx, idx])
        a = np.concatenate([a, uu, uu - cell])
        b = np.concatenate([b, uu + cell, uu])
        ur = uu[rows]
        c = b - INVPHI * (b - a)
        d = a + INVPHI * (b - a)
        fc, fd = G(ur, c), G(ur, d)
        for _ in range(iters):
            m = fc <= fd
            b2 = np.where(m, d, b)
            a2 = np.where(m, a, c)
            c2 = np.where(m, b2 - INVPHI * (b2 - a2), d)
            d2 = np.where(m, c, a2 + INVPHI * (b2 - a2))
            fc2 = np.where(m, G(ur, c2), fd)
            fd2 = np.where(m, fc, G(ur, d2))
            a, b, c, d, fc, fd = a2, b2, c2, d2, fc2, fd2
        rowbest = best.copy()
        np.minimum.at(rowbest, rows, np.minimum(fc, fd))
        r = e - rowbest
        out[start:start + chunk] = np.maximum(r, 0.0)
    return out
