"""Double-word ("double-double") arithmetic.

A value is an unevaluated pair ``(hi, lo)`` with ``|lo| <= ulp(hi)/2``, giving
roughly 32 significant decimal digits.  All routines are error-free
transformations on IEEE doubles and are compiled with numba so the integrator
kernels can call them; they work unchanged from Python.
"""
from __future__ import annotations

from numba import njit

_SPLITTER = 134217729.0  # 2**27 + 1


@njit(cache=True)
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True)
def quick_two_sum(a, b):
    # requires |a| >= |b|
    s = a + b
    return s, b - (s - a)


@njit(cache=True)
def split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


@njit(cache=True)
def two_prod(a, b):
    p = a * b
    ahi, alo = split(a)
    bhi, blo = split(b)
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


@njit(cache=True)
def dd_add(ahi, alo, bhi, blo):
    s, e = two_sum(ahi, bhi)
    t, f = two_sum(alo, blo)
    e += t
    s, e = quick_two_sum(s, e)
    e += f
    return quick_two_sum(s, e)


@njit(cache=True)
def dd_add_d(ahi, alo, b):
    s, e = two_sum(ahi, b)
    e += alo
    return quick_two_sum(s, e)


@njit(cache=True)
def dd_mul(ahi, alo, bhi, blo):
    p, e = two_prod(ahi, bhi)
    e += ahi * blo + alo * bhi
    return quick_two_sum(p, e)


@njit(cache=True)
def dd_mul_d(ahi, alo, b):
    p, e = two_prod(ahi, b)
    e += alo * b
    return quick_two_sum(p, e)


@njit(cache=True)
def dd_div(ahi, alo, bhi, blo):
    q1 = ahi / bhi
    # r = a - q1 * b
    phi, plo = dd_mul_d(bhi, blo, q1)
    rhi, rlo = dd_add(ahi, alo, -phi, -plo)
    q2 = rhi / bhi
    phi, plo = dd_mul_d(bhi, blo, q2)
    rhi, rlo = dd_add(rhi, rlo, -phi, -plo)
    q3 = rhi / bhi
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add_d(q1, q2, q3)


@njit(cache=True)
def dd_sqrt(ahi, alo):
    if ahi <= 0.0:
        return 0.0, 0.0
    x = 1.0 / ahi ** 0.5
    axhi = ahi * x
    # one Newton correction in double-word: sqrt(a) ~ ax + (a - ax^2) x / 2
    shi, slo = two_prod(axhi, axhi)
    dhi, dlo = dd_add(ahi, alo, -shi, -slo)
    corr = dhi * x * 0.5
    return two_sum(axhi, corr)


class DD:
    """Small convenience wrapper for interactive use and tests."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi: float, lo: float = 0.0):
        self.hi, self.lo = two_sum(float(hi), float(lo))

    def __add__(self, other):
        other = _as_dd(other)
        return DD(*dd_add(self.hi, self.lo, other.hi, other.lo))

    __radd__ = __add__

    def __neg__(self):
        return DD(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-_as_dd(other))

    def __rsub__(self, other):
        return _as_dd(other) - self

    def __mul__(self, other):
        other = _as_dd(other)
        return DD(*dd_mul(self.hi, self.lo, other.hi, other.lo))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_dd(other)
        return DD(*dd_div(self.hi, self.lo, other.hi, other.lo))

    def sqrt(self):
        return DD(*dd_sqrt(self.hi, self.lo))

    def __float__(self):
        return self.hi + self.lo

    def __repr__(self):
        return f"DD({self.hi!r}, {self.lo!r})"


def _as_dd(v) -> DD:
    return v if isinstance(v, DD) else DD(float(v))
