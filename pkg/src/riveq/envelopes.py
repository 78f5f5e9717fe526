"""Monotone envelopes of the corrected slopes and their inverse graphs.

Upper side: m(u) = max over [ubar, u] of W'_ir, for u >= ubar, with
    p_l(l) = min {u >= ubar : W'_ir(u) >= l},
    p_r(l) = inf {u >= ubar : W'_ir(u) > l}.
Lower side: running min of W'_sl for u <= ubar, with
    q_l(l) = sup {u <= ubar : W'_sl(u) < l},
    q_r(l) = max {u <= ubar : W'_sl(u) <= l}.

The lower side is stored in the mirrored coordinate x = -u (values -W'_sl),
which turns it into an upper envelope, so one code path serves both.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange, ValidationError
from .numerics import coercive_bracket, golden_section
from .slopes import slopes_batch

GRID_POINTS = 8192
LEVEL_TOL = 1e-11
CONTACT_TOL = 1e-8
BISECT_TOL = 1e-9


@dataclass
class MonotoneEnvelope:
    sys: object
    base_point: float
    side: str
    grid: np.ndarray  # states, increasing
    slope: np.ndarray  # W'_ir (upper) or W'_sl (lower) on the grid
    values: np.ndarray  # envelope on the grid
    _x: np.ndarray = field(repr=False, default=None)
    _s: np.ndarray = field(repr=False, default=None)

    @property
    def sign(self):
        return 1.0 if self.side == "upper_of_ir" else -1.0

    def slope_at(self, u):
        return float(slopes_batch(self.sys, np.array([u]), "ir" if self.sign > 0 else "sl")[0])

    def envelope_at(self, u):
        """Envelope value at an arbitrary state (grid lookup plus exact slope)."""
        x = self.sign * u
        k = np.searchsorted(self._x, x, side="right") - 1
        if k < 0:
            raise OutOfRange(f"state {u} is on the wrong side of the base point")
        here = self.sign * self.slope_at(u)
        run = np.max(self._s[: k + 1]) if k >= 0 else -np.inf
        return self.sign * max(here, run)

    # mirrored-coordinate primitives: first x with s(x) >= level (strict=False)
    # or s(x) > level (strict=True), refined by bisection on the slope itself
    def _first_cross(self, level, strict):
        s = self._s
        tol = LEVEL_TOL
        hit = (s > level + tol) if strict else (s >= level - tol)
        idx = np.flatnonzero(hit)
        if idx.size == 0:
            raise OutOfRange(f"level {self.sign * level} is beyond the envelope range")
        k = int(idx[0])
        if k == 0:
            return float(self._x[0])
        lo, hi = float(self._x[k - 1]), float(self._x[k])
        while hi - lo > BISECT_TOL:
            mid = 0.5 * (lo + hi)
            v = self.sign * self.slope_at(self.sign * mid)
            ok = (v > level + tol) if strict else (v >= level - tol)
            if ok:
                hi = mid
            else:
                lo = mid
        return hi

    def max_level(self):
        return self.sign * float(np.max(self._s))

    def p_left(self, level):
        return self._endpoint(level, "l")

    def p_right(self, level):
        return self._endpoint(level, "r")

    def _endpoint(self, level, which):
        lev = self.sign * level
        if self.sign > 0:
            x = self._first_cross(lev, strict=(which == "r"))
        else:
            # q_r = max{u: W'_sl <= l}  <->  first x with -W'_sl >= -l
            # q_l = sup{u: W'_sl < l}   <->  first x with -W'_sl > -l
            x = self._first_cross(lev, strict=(which == "l"))
        return self.sign * x

    def interval(self, level):
        """[p_l, p_r] for the upper side, [q_l, q_r] for the lower side."""
        a, b = self._endpoint(level, "l"), self._endpoint(level, "r")
        return (min(a, b), max(a, b))

    def contact_selection(self, level):
        """Components of {u in [p_l, p_r] : slope(u) = level}, as (lo, hi) pairs.

        Isolated contact points come back with lo == hi; sliding stretches of
        the slope at the level come back as genuine intervals.
        """
        lev = self.sign * level
        xa = self.sign * self._endpoint(level, "l")
        xb = self.sign * self._endpoint(level, "r")
        xa, xb = min(xa, xb), max(xa, xb)
        pts = [xa, xb]
        sel = (self._x > xa) & (self._x < xb)
        xs, ss = self._x[sel], self._s[sel]
        on = np.abs(ss - lev) <= CONTACT_TOL
        comps = []
        i = 0
        n = xs.size
        while i < n:
            if not on[i]:
                i += 1
                continue
            j = i
            while j + 1 < n and on[j + 1]:
                j += 1
            lo = self._refine_contact(xs[i - 1] if i > 0 else xa, xs[i], lev)
            hi = self._refine_contact(xs[j + 1] if j + 1 < n else xb, xs[j], lev)
            comps.append((min(lo, hi), max(lo, hi)))
            i = j + 1
        comps.extend((p, p) for p in pts if abs(self.sign * self.slope_at(self.sign * p) - lev) <= CONTACT_TOL)
        if lev <= self._s[0] + CONTACT_TOL:
            comps.append((float(self._x[0]), float(self._x[0])))
        comps.sort()
        merged = []
        for lo, hi in comps:
            if merged and lo <= merged[-1][1] + 10 * BISECT_TOL:
                merged[-1] = (merged[-1][0], max(hi, merged[-1][1]))
            else:
                merged.append((lo, hi))
        if self.sign < 0:
            merged = sorted((-hi, -lo) for lo, hi in merged)
        return [(float(a), float(b)) for a, b in merged]

    def _refine_contact(self, x_out, x_in, lev):
        # bisection between a non-contact and a contact abscissa
        out, inside = float(x_out), float(x_in)
        if abs(self.sign * self.slope_at(self.sign * out) - lev) <= CONTACT_TOL:
            return out
        while abs(inside - out) > BISECT_TOL:
            mid = 0.5 * (out + inside)
            if abs(self.sign * self.slope_at(self.sign * mid) - lev) <= CONTACT_TOL:
                inside = mid
            else:
                out = mid
        return inside

    def plateaus(self, min_width=1e-6):
        """Levels where the envelope is flat over more than ``min_width``."""
        vals, x = self.sign * self.values, self._x
        if self.sign < 0:
            vals = vals[::-1]
        out = []
        i = 0
        while i < len(x) - 1:
            j = i
            while j + 1 < len(x) and vals[j + 1] <= vals[i] + LEVEL_TOL:
                j += 1
            if x[j] - x[i] > min_width and j > i:
                out.append(self.sign * float(vals[i]))
            i = j + 1 if j > i else i + 1
        return out


def _insert_slope_maxima(sys, grid, slope, kind, limit=64):
    """Refine discrete local maxima of the envelope-side slope and insert them.

    Touching points of a plateau (e.g. the wells of a Maxwell plateau) are
    local maxima of the slope that need not lie on the grid; without them
    p_l would overshoot to the far end of the plateau.
    """
    sgn = 1.0 if kind == "ir" else -1.0
    s = sgn * slope
    k = np.flatnonzero((s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:])) + 1
    if k.size > limit:
        k = k[np.argsort(-s[k])[:limit]]
    new_x, new_s = [], []
    for i in k:
        def neg(u):
            return -sgn * float(slopes_batch(sys, np.array([u]), kind)[0])

        xm, fm = golden_section(neg, float(grid[i - 1]), float(grid[i + 1]), 1e-10, 200)
        new_x.append(xm)
        new_s.append(-sgn * fm)
    if not new_x:
        return grid, slope
    g = np.concatenate([grid, new_x])
    v = np.concatenate([slope, new_s])
    order = np.argsort(g, kind="stable")
    g, v = g[order], v[order]
    keep = np.concatenate([[True], np.diff(g) > 0])
    return g[keep], v[keep]


def build_envelope(sys, ubar, side="upper_of_ir", domain_end=None, grid_points=GRID_POINTS):
    """Running max (upper_of_ir) or running min (lower_of_sl) of the slope from ubar."""
    if side not in ("upper_of_ir", "lower_of_sl"):
        raise ValidationError(f"unknown envelope side {side!r}")
    ubar = float(ubar)
    lo, hi = coercive_bracket(sys, ubar)
    if side == "upper_of_ir":
        end = hi if domain_end is None else float(domain_end)
        if end <= ubar:
            raise ValidationError("upper envelope needs domain end > base point")
        grid = np.linspace(ubar, end, grid_points)
        extra = sys.W.slope_stationary_points(ubar, end)
    else:
        end = lo if domain_end is None else float(domain_end)
        if end >= ubar:
            raise ValidationError("lower envelope needs domain end < base point")
        grid = np.linspace(end, ubar, grid_points)
        extra = sys.W.slope_stationary_points(end, ubar)
    grid = np.unique(np.concatenate([grid, extra]))
    kind = "ir" if side == "upper_of_ir" else "sl"
    slope = slopes_batch(sys, grid, kind)
    grid, slope = _insert_slope_maxima(sys, grid, slope, kind)
    if side == "upper_of_ir":
        values = np.maximum.accumulate(slope)
        x, s = grid, slope
    else:
        values = np.minimum.accumulate(slope[::-1])[::-1]
        x, s = -grid[::-1], -slope[::-1]
    return MonotoneEnvelope(sys, ubar, side, grid, slope, values, x, s)


def p_left(env, level):
    return env.p_left(level)


def p_right(env, level):
    return env.p_right(level)


def q_left(env, level):
    return env.p_left(level)


def q_right(env, level):
    return env.p_right(level)


def contact_selection(env, level):
    return env.contact_selection(level)
