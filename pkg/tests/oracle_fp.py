"""Exact-rational reference for IEEE-754 binary rounding.

Everything here works in `fractions.Fraction`, so it shares no machinery
with the JIT floating-point helpers it is used to check.  Only finite
inputs are meaningful; callers handle NaN and infinity separately.
"""

from fractions import Fraction

import numpy as np

F32 = (24, -126, 127)
F64 = (53, -1022, 1023)

_HALF = Fraction(1, 2)


def _p2(k):
    if k >= 0:
        return Fraction(1 << k)
    return Fraction(1, 1 << -k)


def round_rat(x, fmt):
    """Round an exact rational to the format with ties to even.

    Returns (fraction, overflowed).  The fraction is exactly representable
    in the format unless overflowed is True.
    """
    p, emin, emax = fmt
    if x == 0:
        return Fraction(0), False
    neg = x < 0
    a = -x if neg else x
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if _p2(e) > a:
        e -= 1
    elif _p2(e + 1) <= a:
        e += 1
    qe = max(e - (p - 1), emin - (p - 1))
    m = a / _p2(qe)
    fl = m.numerator // m.denominator
    rem = m - fl
    if rem > _HALF or (rem == _HALF and (fl & 1)):
        fl += 1
    r = fl * _p2(qe)
    if r >= _p2(emax + 1):
        return Fraction(0), True
    return (-r if neg else r), False


def round_f32(x):
    r, ovf = round_rat(x, F32)
    if ovf:
        return np.float32(np.inf) if x > 0 else np.float32(-np.inf)
    return np.float32(float(r))


def round_f64(x):
    r, ovf = round_rat(x, F64)
    if ovf:
        return float("inf") if x > 0 else float("-inf")
    return float(r)


def frac(v):
    """Exact value of a finite float/np scalar."""
    return Fraction(float(v))


def _zero_sign_add(neg_a, neg_b):
    """IEEE sign of an exact-zero sum under round-to-nearest."""
    return neg_a and neg_b


def fma32(a, b, c):
    """Correctly rounded float32 fused multiply-add of finite operands."""
    a = np.float32(a)
    b = np.float32(b)
    c = np.float32(c)
    fa, fb, fc = frac(a), frac(b), frac(c)
    x = fa * fb + fc
    if x == 0:
        pneg = bool(np.signbit(a)) != bool(np.signbit(b))
        if fa * fb == 0 and fc == 0:
            neg = _zero_sign_add(pneg, bool(np.signbit(c)))
        else:
            neg = False          # exact cancellation of nonzero terms
        return np.float32(-0.0) if neg else np.float32(0.0)
    return round_f32(x)


def fma64(a, b, c):
    """Correctly rounded float64 fused multiply-add of finite operands."""
    a = float(a)
    b = float(b)
    c = float(c)
    fa, fb, fc = Fraction(a), Fraction(b), Fraction(c)
    x = fa * fb + fc
    if x == 0:
        pneg = bool(np.signbit(a)) != bool(np.signbit(b))
        if fa * fb == 0 and fc == 0:
            neg = _zero_sign_add(pneg, bool(np.signbit(np.float64(c))))
        else:
            neg = False
        return -0.0 if neg else 0.0
    return round_f64(x)


def sqrt32(a):
    """Correctly rounded float32 square root of a finite nonnegative value."""
    a = np.float32(a)
    if a == 0:
        return a
    fa = frac(a)
    k = 90
    scaled = fa.numerator << (2 * k)
    import math
    s = math.isqrt(scaled // fa.denominator)
    approx = Fraction(s, 1 << k)
    if approx * approx == fa:
        return round_f32(approx)
    # 2^-90 of slack cannot reach a rounding boundary for a non-square
    return round_f32(approx + Fraction(1, 1 << (k + 3)))


def to_int_rne(v, lo, hi, nan_val):
    """Round-to-nearest-even integer conversion with saturation."""
    d = float(v)
    if d != d:
        return nan_val
    if d == float("inf"):
        return hi
    if d == float("-inf"):
        return lo
    x = Fraction(d)
    fl = x.numerator // x.denominator
    rem = x - fl
    if rem > _HALF or (rem == _HALF and (fl & 1)):
        fl += 1
    return max(lo, min(hi, fl))
