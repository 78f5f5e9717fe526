"""Scalar numerics: bracketed global minimization, coercive brackets, quadrature."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BracketOverflow, NonFiniteValue, ValidationError

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MinimizeSettings:
    grid_points: int = 4096
    refine_tol: float = 1e-10
    max_refine_iters: int = 200
    value_tie_tol: float = 1e-9

    def __post_init__(self):
        if self.grid_points < 16:
            raise ValidationError("grid_points must be >= 16")
        if not self.refine_tol > 0:
            raise ValidationError("refine_tol must be > 0")
        if self.max_refine_iters < 1:
            raise ValidationError("max_refine_iters must be >= 1")
        if not self.value_tie_tol > 0:
            raise ValidationError("value_tie_tol must be > 0")


DEFAULT_SETTINGS = MinimizeSettings()


@dataclass(frozen=True)
class ArgminSet:
    minimizers: tuple
    min_value: float

    def __len__(self):
        return len(self.minimizers)

    def __iter__(self):
        return iter(self.minimizers)

    def __contains__(self, x):
        return any(abs(m - x) <= 1e-9 * (1 + abs(x)) for m in self.minimizers)


def golden_section(f, a, b, tol=1e-10, max_iter=200):
    """Minimize a unimodal f on [a, b]; returns (x, f(x))."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
        it += 1
    return (c, fc) if fc <= fd else (d, fd)


def _root_refine(f, deriv, a, b, fa, fb):
    """Minimizer on [a, b] as the root of deriv, or None when not bracketed."""
    if not (deriv(a) < 0 < deriv(b)):
        return None
    try:
        xr = brentq(deriv, a, b, xtol=1e-15, rtol=1e-15, maxiter=100)
    except (ValueError, RuntimeError):
        return None
    fr = float(f(xr))
    if fr <= min(fa, fb) + 1e-12 * (1.0 + abs(fr)):
        return float(xr), fr
    return None


def _eval_grid(f, x):
    try:
        y = np.asarray(f(x), dtype=float)
        if y.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([float(f(float(v))) for v in x])
    return y


def global_min(f, lo, hi, settings=None, extra_points=(), deriv=None):
    """All near-global minimizers of a continuous f on [lo, hi].

    f is evaluated on a uniform grid (vectorized when f accepts arrays); each
    discrete local minimum is refined by golden section on its two neighbouring
    cells, and every refined point within value_tie_tol of the best survives.
    ``extra_points`` are evaluated exactly and compete with the refined ones,
    which lets callers pin minimizers sitting on a kink. When ``deriv`` is
    given and changes sign across a bracket, a root solve on deriv replaces
    golden section there, since golden section alone cannot resolve a smooth
    minimizer below about sqrt(machine eps).
    """
    s = settings or DEFAULT_SETTINGS
    if not hi > lo:
        raise ValidationError(f"global_min needs lo < hi, got [{lo}, {hi}]")
    x = np.linspace(lo, hi, s.grid_points)
    y = _eval_grid(f, x)
    if not np.all(np.isfinite(y)):
        k = int(np.argmin(np.isfinite(y)))
        raise NonFiniteValue(f"objective is not finite at {x[k]}")

    left = np.concatenate(([np.inf], y[:-1]))
    right = np.concatenate((y[1:], [np.inf]))
    is_min = (y <= left) & (y <= right)
    idx = np.flatnonzero(is_min)
    # collapse runs of equal values (flat stretches) to their middle
    if idx.size > 1:
        groups = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        idx = np.array([g[len(g) // 2] for g in groups])
    if idx.size > 64:
        idx = idx[np.argsort(y[idx], kind="stable")[:64]]

    cands = []
    n = s.grid_points
    for i in idx:
        a = x[max(i - 1, 0)]
        b = x[min(i + 1, n - 1)]
        hit = None
        if deriv is not None:
            hit = _root_refine(f, deriv, a, b, y[max(i - 1, 0)], y[min(i + 1, n - 1)])
        if hit is None:
            xm, fm = golden_section(f, a, b, s.refine_tol, s.max_refine_iters)
        else:
            xm, fm = hit
        fm = float(fm)
        if y[i] < fm:
            xm, fm = x[i], float(y[i])
        cands.append((float(xm), fm))
    for p in extra_points:
        if lo <= p <= hi:
            cands.append((float(p), float(f(p))))

    best = min(v for _, v in cands)
    keep = sorted((xm, v) for xm, v in cands if v <= best + s.value_tie_tol)
    merged = []
    for xm, v in keep:
        if merged and xm - merged[-1][0] <= 10 * s.refine_tol:
            # prefer exactly evaluated extra points, otherwise the lower value
            if xm in extra_points or (merged[-1][0] not in extra_points and v < merged[-1][1]):
                merged[-1] = (xm, v)
            continue
        merged.append((xm, v))
    return ArgminSet(tuple(m for m, _ in merged), best)


def coercive_bracket(sys, u_ref, expand=1.25, pad=0.1):
    """Interval containing every minimizer of E(t, .) + D(u_ref, .) for all t.

    Expands symmetrically about u_ref until W'(hi) - max l - a_plus > 0 and
    W'(lo) - min l + a_minus < 0, then pads by ``pad`` of the width.
    """
    W, B = sys.W, sys.W.bound
    lmin, lmax = sys.ell_bounds
    ap, am = sys.psi.alpha_plus, sys.psi.alpha_minus
    key = (float(u_ref), expand, pad)
    cache = sys.__dict__.setdefault("_bracket_cache", {})
    if key in cache:
        return cache[key]
    w = 0.25
    while True:
        lo, hi = u_ref - w, u_ref + w
        if W.deriv(hi) - lmax - ap > 0 and W.deriv(lo) - lmin + am < 0:
            break
        w *= expand
        if w > 2 * B + abs(u_ref):
            raise BracketOverflow(f"no coercive bracket around {u_ref} inside [-{B}, {B}]")
    width = hi - lo
    lo, hi = lo - pad * width, hi + pad * width
    if lo < -B or hi > B:
        raise BracketOverflow(f"coercive bracket [{lo}, {hi}] exceeds the eval bound {B}")
    if len(cache) > 4096:
        cache.clear()
    cache[key] = (lo, hi)
    return lo, hi


def integrate(f, lo, hi, tol=1e-10, max_depth=50):
    """Adaptive composite Simpson quadrature of f over [lo, hi]."""
    if hi < lo:
        raise ValidationError("integrate needs lo <= hi")
    if hi == lo:
        return 0.0

    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    fa, fb = f(lo), f(hi)
    m, fm, whole = simpson(lo, fa, hi, fb)
    total = 0.0
    stack = [(lo, fa, hi, fb, m, fm, whole, tol, 0)]
    while stack:
        a, fa, b, fb, m, fm, whole, eps, depth = stack.pop()
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        err = left + right - whole
        if depth >= max_depth or abs(err) <= 15.0 * eps:
            total += left + right + err / 15.0
        else:
            stack.append((a, fa, m, fm, lm, flm, left, 0.5 * eps, depth + 1))
            stack.append((m, fm, b, fb, rm, frm, right, 0.5 * eps, depth + 1))
    return float(total)
