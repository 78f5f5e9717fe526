"""Ingredients of a one-dimensional rate-independent system.

The energy is E(t, u) = W(u) - l(t) u, the dissipation potential is
Psi(v) = a_plus v^+ + a_minus v^-, and the viscous correction delta is added
to Psi to form the augmented dissipation D(u, v) = Psi(v - u) + delta(u, v).

All evaluation methods accept python floats or numpy arrays.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_interval, as_positive, as_real, check_in_box
from .errors import AdmissibilityFailure, ValidationError

DEFAULT_BOUND = 1e3
JOIN_TOL = 1e-12


def _horner(coeffs, x):
    # coeffs lowest degree first
    r = 0.0 * x + coeffs[-1]
    for c in reversed(coeffs[:-1]):
        r = r * x + c
    return r


def _poly_deriv(coeffs):
    if len(coeffs) <= 1:
        return (0.0,)
    return tuple(k * c for k, c in enumerate(coeffs) if k > 0)


def _poly_dd(coeffs, a, c):
    """(p(c) - p(a)) / (c - a) without cancellation; equals p'(a) at c == a."""
    # h_k = sum_{j<k} c^j a^{k-1-j}, h_k = c h_{k-1} + a^{k-1}
    total = 0.0 * (a + c)
    h = 0.0 * (a + c)
    apow = 1.0 + 0.0 * a
    for k in range(1, len(coeffs)):
        h = c * h + apow
        apow = apow * a
        total = total + coeffs[k] * h
    return total


def _real_roots(coeffs, lo, hi):
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if coeffs.size <= 1:
        return []
    roots = np.roots(coeffs[::-1])
    out = []
    for r in roots:
        if abs(r.imag) <= 1e-9 * (1 + abs(r.real)) and lo <= r.real <= hi:
            out.append(float(r.real))
    return sorted(out)


@dataclass(frozen=True)
class EnergyDensity:
    """Piecewise polynomial energy density W, C^1 across breakpoints.

    ``pieces`` holds polynomial coefficient tuples (lowest degree first) and
    ``breakpoints`` the interior joins; piece i lives between breakpoints i-1
    and i, the first and last extend to -inf and +inf.
    """

    kind: str
    pieces: tuple
    breakpoints: tuple = ()
    bound: float = DEFAULT_BOUND
    label: str = ""
    _dpieces: tuple = field(init=False, repr=False, compare=False)
    _ddpieces: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValidationError("composite energy needs one more piece than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValidationError("composite breakpoints must be strictly increasing")
        as_positive(self.bound, "eval bound B")
        d = tuple(_poly_deriv(p) for p in self.pieces)
        object.__setattr__(self, "_dpieces", d)
        object.__setattr__(self, "_ddpieces", tuple(_poly_deriv(p) for p in d))
        for i, b in enumerate(self.breakpoints):
            left, right = self.pieces[i], self.pieces[i + 1]
            jump_val = abs(_horner(left, b) - _horner(right, b))
            jump_der = abs(_horner(d[i], b) - _horner(d[i + 1], b))
            if jump_val > JOIN_TOL or jump_der > JOIN_TOL:
                raise ValidationError(
                    f"energy is not C^1 at breakpoint {b}: value jump {jump_val:.3e}, "
                    f"derivative jump {jump_der:.3e}"
                )

    # constructors
    @classmethod
    def polynomial(cls, coefficients, bound=DEFAULT_BOUND):
        coeffs = tuple(as_real(c, "coefficient") for c in coefficients)
        if not coeffs:
            raise ValidationError("polynomial needs at least one coefficient")
        return cls("polynomial", (coeffs,), (), bound, "polynomial")

    @classmethod
    def quartic_double_well(cls, scale=1.0, bound=DEFAULT_BOUND):
        s = as_positive(scale, "scale")
        return cls("quartic_double_well", ((0.25 * s, 0.0, -0.5 * s, 0.0, 0.25 * s),), (), bound,
                   f"quartic_double_well(scale={s!r})")

    @classmethod
    def composite(cls, pieces, bound=DEFAULT_BOUND):
        """``pieces``: list of ((lo, hi), coefficients) covering the real line in order."""
        if not pieces:
            raise ValidationError("composite energy needs at least one piece")
        polys, breaks = [], []
        prev_hi = None
        for k, ((lo, hi), coeffs) in enumerate(pieces):
            lo, hi = float(lo), float(hi)
            if k == 0 and lo != -math.inf:
                raise ValidationError("first composite piece must start at -inf")
            if k > 0:
                if lo != prev_hi:
                    raise ValidationError("composite pieces must be contiguous")
                breaks.append(lo)
            prev_hi = hi
            polys.append(tuple(as_real(c, "coefficient") for c in coeffs))
        if prev_hi != math.inf:
            raise ValidationError("last composite piece must end at +inf")
        return cls("composite", tuple(polys), tuple(breaks), bound, "composite")

    # evaluation
    def _piecewise(self, polys, u):
        if len(polys) == 1:
            return _horner(polys[0], u)
        if np.ndim(u) == 0:
            i = int(np.searchsorted(self.breakpoints, u, side="right"))
            return _horner(polys[i], u)
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.breakpoints, u, side="right")
        out = np.empty_like(u)
        for i, p in enumerate(polys):
            m = idx == i
            if np.any(m):
                out[m] = _horner(p, u[m])
        return out

    def value(self, u):
        return self._piecewise(self.pieces, u)

    def deriv(self, u):
        return self._piecewise(self._dpieces, u)

    def second(self, u):
        return self._piecewise(self._ddpieces, u)

    def divided_difference(self, u, z):
        """(W(z) - W(u)) / (z - u), continuously extended by W'(u) at z == u."""
        if len(self.pieces) == 1:
            return _poly_dd(self.pieces[0], u, z)
        lo = np.minimum(u, z)
        hi = np.maximum(u, z)
        total = 0.0 * lo
        edges = (-math.inf,) + self.breakpoints + (math.inf,)
        for i, p in enumerate(self.pieces):
            a = np.clip(lo, edges[i], edges[i + 1])
            c = np.clip(hi, edges[i], edges[i + 1])
            total = total + _poly_dd(p, a, c) * (c - a)
        width = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            dd = np.where(width > 0, total / np.where(width > 0, width, 1.0), self.deriv(u))
        return dd if np.ndim(dd) else float(dd)

    def slope_stationary_points(self, lo, hi):
        """Roots of W'' in [lo, hi] plus breakpoints there (kinks of W'')."""
        pts = []
        edges = (-math.inf,) + self.breakpoints + (math.inf,)
        for i, p in enumerate(self._ddpieces):
            a, b = max(lo, edges[i]), min(hi, edges[i + 1])
            if a <= b:
                pts.extend(_real_roots(p, a, b))
        pts.extend(b for b in self.breakpoints if lo <= b <= hi)
        return sorted(set(pts))

    def min_second_derivative(self, lo, hi, n=20001):
        u = np.linspace(lo, hi, n)
        cand = list(u) + self.slope_stationary_points(lo, hi)
        # critical points of W'' are roots of W'''
        edges = (-math.inf,) + self.breakpoints + (math.inf,)
        for i, p in enumerate(self._ddpieces):
            a, b = max(lo, edges[i]), min(hi, edges[i + 1])
            if a <= b:
                cand.extend(_real_roots(_poly_deriv(p), a, b))
        return float(np.min(self.second(np.asarray(cand))))

    def describe(self):
        if self.kind == "composite":
            return f"composite(breakpoints={list(self.breakpoints)})"
        return self.label or self.kind


@dataclass(frozen=True)
class Loading:
    """External loading l(t) on [a, b]; C^1 across segment joins."""

    kind: str
    interval: tuple
    params: tuple
    segments: tuple = ()

    def __post_init__(self):
        a, b = as_interval(*self.interval, name="loading interval")
        object.__setattr__(self, "interval", (a, b))
        if self.kind == "piecewise_C1":
            starts = [s[0][0] for s in self.segments]
            ends = [s[0][1] for s in self.segments]
            if abs(starts[0] - a) > JOIN_TOL or abs(ends[-1] - b) > JOIN_TOL:
                raise ValidationError("piecewise loading segments must cover [a, b]")
            for (s1, c1), (s2, c2) in zip(self.segments, self.segments[1:]):
                if s1[1] != s2[0]:
                    raise ValidationError("piecewise loading segments must be contiguous")
                tj = s1[1]
                dv = abs(_horner(c1, tj) - _horner(c2, tj))
                dd = abs(_horner(_poly_deriv(c1), tj) - _horner(_poly_deriv(c2), tj))
                if dv > JOIN_TOL or dd > JOIN_TOL:
                    raise ValidationError(f"loading is not C^1 at t={tj}")

    @classmethod
    def linear(cls, slope, intercept, interval):
        return cls("linear", tuple(interval), (as_real(slope, "slope"), as_real(intercept, "intercept")))

    @classmethod
    def sine(cls, amplitude, frequency, phase, interval):
        return cls("sine", tuple(interval),
                   (as_real(amplitude, "amplitude"), as_real(frequency, "frequency"), as_real(phase, "phase")))

    @classmethod
    def piecewise_c1(cls, segments):
        """``segments``: list of ((t0, t1), coefficients in t, lowest degree first)."""
        segs = tuple(((float(s[0]), float(s[1])), tuple(float(c) for c in cs)) for s, cs in segments)
        if not segs:
            raise ValidationError("piecewise loading needs at least one segment")
        return cls("piecewise_C1", (segs[0][0][0], segs[-1][0][1]), (), segs)

    def _segment(self, t):
        for k, ((t0, t1), c) in enumerate(self.segments):
            if t < t1 or k == len(self.segments) - 1:
                return c
        return self.segments[-1][1]

    def value(self, t):
        if self.kind == "linear":
            s, c = self.params
            return s * t + c
        if self.kind == "sine":
            A, w, ph = self.params
            return A * np.sin(w * t + ph) if np.ndim(t) else A * math.sin(w * t + ph)
        if np.ndim(t):
            return np.array([self.value(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        return _horner(self._segment(t), t)

    def deriv(self, t):
        if self.kind == "linear":
            return self.params[0] + 0.0 * t
        if self.kind == "sine":
            A, w, ph = self.params
            return A * w * np.cos(w * t + ph) if np.ndim(t) else A * w * math.cos(w * t + ph)
        if np.ndim(t):
            return np.array([self.deriv(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        return _horner(_poly_deriv(self._segment(t)), t)

    def bounds(self):
        """(min l, max l) over [a, b], from endpoints and interior critical points."""
        a, b = self.interval
        cand = [a, b]
        if self.kind == "sine":
            A, w, ph = self.params
            if w != 0:
                k0 = math.floor((w * min(a, b) + ph) / math.pi) - 1
                # critical points w t + ph = pi/2 + k pi
                for k in range(k0, k0 + int(abs(w) * (b - a) / math.pi) + 4):
                    for tc in ((math.pi / 2 + k * math.pi - ph) / w,):
                        if a <= tc <= b:
                            cand.append(tc)
        elif self.kind == "piecewise_C1":
            for (t0, t1), c in self.segments:
                cand.extend([t0, t1])
                cand.extend(_real_roots(_poly_deriv(c), t0, t1))
        vals = [float(self.value(t)) for t in cand]
        return min(vals), max(vals)

    def is_monotone(self, n=2049):
        """+1 nondecreasing, -1 nonincreasing, 0 otherwise (sampled derivative)."""
        t = np.linspace(*self.interval, n)
        d = np.asarray(self.deriv(t), dtype=float)
        if np.all(d >= -1e-12):
            return 1
        if np.all(d <= 1e-12):
            return -1
        return 0

    def describe(self):
        if self.kind == "piecewise_C1":
            return f"piecewise_C1({len(self.segments)} segments)"
        return f"{self.kind}{self.params}"


@dataclass(frozen=True)
class Dissipation:
    alpha_plus: float
    alpha_minus: float

    def __post_init__(self):
        as_positive(self.alpha_plus, "alpha_plus")
        as_positive(self.alpha_minus, "alpha_minus")

    def __call__(self, v):
        if np.ndim(v) == 0:
            return self.alpha_plus * v if v > 0 else -self.alpha_minus * v
        v = np.asarray(v, dtype=float)
        return np.where(v > 0, self.alpha_plus * v, -self.alpha_minus * v)


@dataclass(frozen=True)
class PowerLaw:
    """Convex descriptor f(r) = coefficient * r**exponent on r >= 0."""

    coefficient: float
    exponent: float

    def __post_init__(self):
        as_positive(self.coefficient, "coefficient")
        if as_real(self.exponent, "exponent") < 1:
            raise ValidationError("exponent must be >= 1 for a convex descriptor")

    def __call__(self, r):
        return self.coefficient * r ** self.exponent

    def deriv(self, r):
        return self.coefficient * self.exponent * r ** (self.exponent - 1)


@dataclass(frozen=True)
class ViscousCorrection:
    kind: str = "none"
    mu: float = 0.0
    f: PowerLaw = None

    def __post_init__(self):
        if self.kind not in ("none", "quadratic", "convex_of_psi"):
            raise ValidationError(f"unknown viscous correction kind {self.kind!r}")
        if self.kind == "quadratic":
            as_positive(self.mu, "mu", allow_zero=True)
        if self.kind == "convex_of_psi" and self.f is None:
            raise ValidationError("convex_of_psi needs a descriptor f")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def quadratic(cls, mu):
        return cls("quadratic", float(mu))

    @classmethod
    def convex_of_psi(cls, f):
        return cls("convex_of_psi", 0.0, f)

    @property
    def is_zero(self):
        return self.kind == "none" or (self.kind == "quadratic" and self.mu == 0)

    def value(self, u, v, psi=None):
        if self.kind == "none":
            return 0.0 * (v - u)
        h = v - u
        if self.kind == "quadratic":
            return 0.5 * self.mu * h * h
        if psi is None:
            raise ValidationError("convex_of_psi correction needs the dissipation potential")
        return self.f(psi(h))

    def ratio(self, u, z, psi=None):
        """delta(u, z) / (z - u), extended by 0 at z == u."""
        h = z - u
        if self.kind == "none":
            return 0.0 * h
        if self.kind == "quadratic":
            return 0.5 * self.mu * h
        if psi is None:
            raise ValidationError("convex_of_psi correction needs the dissipation potential")
        if np.ndim(h) == 0:
            return self.f(psi(h)) / h if h != 0 else 0.0
        h = np.asarray(h, dtype=float)
        safe = np.where(h == 0, 1.0, h)
        return np.where(h == 0, 0.0, self.f(psi(h)) / safe)

    def dv(self, u, v, psi=None):
        """Partial derivative of delta(u, v) in v."""
        h = v - u
        if self.kind == "none":
            return 0.0 * h
        if self.kind == "quadratic":
            return self.mu * h
        if np.ndim(h) == 0:
            slope = psi.alpha_plus if h > 0 else -psi.alpha_minus
            return self.f.deriv(psi(h)) * slope
        slope = np.where(h > 0, psi.alpha_plus, -psi.alpha_minus)
        return self.f.deriv(psi(h)) * slope

    def dvv(self, u, v, psi=None):
        """Second partial derivative of delta(u, v) in v (scalar, v != u)."""
        if self.kind == "none":
            return 0.0
        if self.kind == "quadratic":
            return self.mu
        h = v - u
        a = psi.alpha_plus if h > 0 else psi.alpha_minus
        r = psi(h)
        f = self.f
        if f.exponent == 1:
            return 0.0
        return f.coefficient * f.exponent * (f.exponent - 1) * r ** (f.exponent - 2) * a * a

    def convention(self):
        if self.kind == "none":
            return "delta=0"
        if self.kind == "quadratic":
            return f"delta=(mu/2)*(v-u)^2;mu={self.mu!r}"
        return f"delta=f(Psi(v-u));f={self.f.coefficient!r}*r^{self.f.exponent!r}"


@dataclass(frozen=True)
class RISystem:
    W: EnergyDensity
    ell: Loading
    psi: Dissipation
    delta: ViscousCorrection = field(default_factory=ViscousCorrection.none)

    def __post_init__(self):
        lmin, lmax = self.ell.bounds()
        object.__setattr__(self, "_ell_bounds", (lmin, lmax))
        lab = max(abs(lmin), abs(lmax))
        B = self.W.bound
        if not self.W.deriv(-B) < -(lab + self.psi.alpha_minus + 1):
            raise ValidationError(f"W' is not coercive at -B={-B}: W'(-B)={self.W.deriv(-B)}")
        if not self.W.deriv(B) > lab + self.psi.alpha_plus + 1:
            raise ValidationError(f"W' is not coercive at B={B}: W'(B)={self.W.deriv(B)}")

    @property
    def interval(self):
        return self.ell.interval

    @property
    def ell_bounds(self):
        return self._ell_bounds

    def energy(self, t, u):
        return self.W.value(u) - self.ell.value(t) * u

    def power(self, t, u):
        return -self.ell.deriv(t) * u

    def dissipation(self, u, v):
        return self.psi(v - u) + self.delta.value(u, v, self.psi)

    def convention(self):
        return self.delta.convention()

    def with_delta(self, delta):
        return RISystem(self.W, self.ell, self.psi, delta)

    def with_loading(self, ell):
        return RISystem(self.W, ell, self.psi, self.delta)


def eval_energy(sys, t, u):
    check_in_box(t, u, sys.interval, sys.W.bound)
    return float(sys.energy(t, u))


def eval_psi(psi, v):
    return psi(v)


def eval_delta(delta, u, v, psi=None):
    return delta.value(u, v, psi)


def eval_D(sys, u, v):
    return sys.dissipation(u, v)


@dataclass
class AdmissibilityReport:
    kind: str
    delta1_ratios: dict
    delta1_pass: bool
    delta2_min_gap: float
    delta2_worst_triple: tuple
    delta2_pass: bool
    vacuous: bool
    note: str = ""

    @property
    def passed(self):
        return self.delta1_pass and self.delta2_pass


def _rng_from_env(seed=None):
    if seed is None:
        env = os.environ.get("RIVEQ_SEED")
        seed = int(env) if env else 0
    return np.random.default_rng(seed)


def check_admissibility(sys, samples=100, raise_on_failure=True, seed=None, span=None):
    """Numerical check of the two admissibility conditions on delta.

    (delta1): delta(u, v) / |v - u| must shrink toward 0 as |v - u| goes over
    1e-2, 1e-4, 1e-6 (by a factor >= 10 per scale). (delta2): the reverse
    triangle gap delta(u0, u1) - delta(u0, v) - delta(v, u1) must be > 0 for
    u0 < v < u1.
    """
    if samples < 10:
        raise ValidationError("samples must be >= 10")
    delta, psi = sys.delta, sys.psi
    if span is None:
        from .numerics import coercive_bracket

        span = coercive_bracket(sys, 0.0)
    lo, hi = span
    u = np.linspace(lo, hi, samples)

    ratios = {}
    for h in (1e-2, 1e-4, 1e-6):
        r_plus = delta.value(u, u + h, psi) / h
        r_minus = delta.value(u, u - h, psi) / h
        ratios[h] = float(max(np.max(r_plus), np.max(r_minus)))
    r = [ratios[h] for h in (1e-2, 1e-4, 1e-6)]
    d1 = all(r[k + 1] == 0 or r[k + 1] * 10 <= r[k] for k in range(2))

    if delta.is_zero:
        return AdmissibilityReport(delta.kind, ratios, d1, 0.0, (), True, True,
                                   "energetic (delta=0), (delta2) vacuous")

    rng = _rng_from_env(seed)
    n = max(10 * samples, 1000)
    trip = np.sort(rng.uniform(lo, hi, size=(n, 3)), axis=1)
    # the canonical equally spaced triple, plus random ones
    trip = np.vstack([[lo, 0.5 * (lo + hi), hi], trip])
    trip = trip[(trip[:, 1] > trip[:, 0]) & (trip[:, 2] > trip[:, 1])]
    u0, v, u1 = trip.T
    d01 = delta.value(u0, u1, psi)
    gap = d01 - delta.value(u0, v, psi) - delta.value(v, u1, psi)
    rel = gap / (1.0 + d01)
    k = int(np.argmin(rel))
    worst = (float(u0[k]), float(v[k]), float(u1[k]))
    d2 = bool(rel[k] > 1e-12)
    report = AdmissibilityReport(delta.kind, ratios, d1, float(gap[k]), worst, d2, False)
    if raise_on_failure and not report.passed:
        which = []
        if not d1:
            which.append(f"(delta1) ratios {r}")
        if not d2:
            which.append(f"(delta2) gap {gap[k]:.3e} at triple {worst}")
        raise AdmissibilityFailure("viscous correction is not admissible: " + "; ".join(which), report)
    return report
