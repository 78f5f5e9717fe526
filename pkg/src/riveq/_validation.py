"""Small input validation helpers shared by the public entry points."""

import math

import numpy as np

from .errors import DomainViolation, ValidationError


def as_real(x, name="value"):
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a real number, got {x!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{name} must be finite, got {v}")
    return v


def as_positive(x, name="value", allow_zero=False):
    v = as_real(x, name)
    if v < 0 or (v == 0 and not allow_zero):
        kind = "nonnegative" if allow_zero else "positive"
        raise ValidationError(f"{name} must be {kind}, got {v}")
    return v


def as_positive_int(x, name="value", minimum=1):
    if isinstance(x, bool) or int(x) != x:
        raise ValidationError(f"{name} must be an integer, got {x!r}")
    x = int(x)
    if x < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {x}")
    return x


def as_interval(lo, hi, name="interval", closed=False):
    lo = as_real(lo, f"{name} lower end")
    hi = as_real(hi, f"{name} upper end")
    if hi < lo or (hi == lo and not closed):
        raise ValidationError(f"{name} needs lo < hi, got [{lo}, {hi}]")
    return lo, hi


def as_float_array(x, name="array"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_in_box(t, u, interval, bound):
    a, b = interval
    if not (a - 1e-12 <= t <= b + 1e-12):
        raise DomainViolation(f"time {t} outside [{a}, {b}]")
    if abs(u) > bound:
        raise DomainViolation(f"state {u} outside [-{bound}, {bound}]")
