"""Internal probability routines: normal, chi-square, Student-t, exact binomial.

Everything is computed from series / continued fractions on top of math.erfc
and math.lgamma, with bracketed inversion for quantiles. No table files, no
external statistics packages.
"""

from __future__ import annotations

import math

_EPS = 1e-15
_MAX_CF_ITER = 400


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x: float) -> float:
    """Upper tail P(Z > x); erfc keeps full relative accuracy far out."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """z with P(Z <= z) = p, |error| < 1e-12."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    lo, hi = -42.0, 42.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    # Newton polish
    for _ in range(4):
        f = normal_cdf(z) - p
        pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        if pdf > 0.0:
            z -= f / pdf
    return z


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a,x) by series, x < a+1."""
    if x <= 0.0:
        return 0.0
    ap = a
    total = 1.0 / a
    term = total
    for _ in range(_MAX_CF_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a,x) by Lentz continued fraction, x >= a+1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_CF_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_p(a: float, x: float) -> float:
    if x < 0.0 or a <= 0.0:
        raise ValueError("gamma_p needs x >= 0, a > 0")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_cf(a, x)


def chi2_cdf(x: float, k: float) -> float:
    if x <= 0.0:
        return 0.0
    return gamma_p(0.5 * k, 0.5 * x)


def chi2_quantile(p: float, k: float) -> float:
    """x with P(chi2_k <= x) = p, bracketed bisection to ~1e-12 relative."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0,1), got {p}")
    hi = max(4.0 * k, 10.0)
    while chi2_cdf(hi, k) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("chi2_quantile bracket failed")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, k) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _beta_cf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betai(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a,b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    x = df / (df + t * t)
    tail = 0.5 * betai(0.5 * df, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p-value for a t statistic."""
    return betai(0.5 * df, 0.5, df / (df + t * t))


def binom_sign_test_p(n_pos: int, n_neg: int) -> float:
    """Exact two-sided sign-test p-value for n_pos successes out of n_pos+n_neg
    fair-coin trials (ties already dropped)."""
    n = n_pos + n_neg
    if n == 0:
        raise ValueError("sign test undefined: no nonzero differences")
    k = min(n_pos, n_neg)
    # P(X <= k), X ~ Bin(n, 1/2), exact
    total = 0
    for i in range(k + 1):
        total += math.comb(n, i)
    p = 2.0 * total / (2.0 ** n)
    return min(1.0, p)
