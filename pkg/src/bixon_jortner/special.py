"""Finite-series special functions used by the closed-form propagator.

Everything here is exact finite arithmetic: Laguerre polynomials and their
first derivative, integer-order incomplete gamma functions of complex
argument, and the removable-singularity kernel (e^x - 1)/x.  All functions
accept scalars; the gamma and ratio kernels also accept numpy arrays.

Accumulations are compensated: scalar sums go through math.fsum (exact),
array sums through an elementwise Kahan accumulator.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "KahanSum",
    "compensated_complex_sum",
    "laguerre",
    "laguerre_series",
    "laguerre_d1",
    "gamma_upper_int",
    "gamma_upper_int_ladder",
    "gamma_lower_int",
    "gamma_lower_int_ladder",
    "expm1_ratio",
]


class KahanSum:
    """Elementwise compensated accumulator for float or complex arrays.

    Kahan's trick applied per element; works unchanged for complex dtype
    (the real and imaginary carries ride together).
    """

    def __init__(self, shape=(), dtype=complex):
        self._s = np.zeros(shape, dtype=dtype)
        self._c = np.zeros(shape, dtype=dtype)

    def add(self, term) -> None:
        y = term - self._c
        t = self._s + y
        self._c = (t - self._s) - y
        self._s = t

    @property
    def total(self) -> np.ndarray:
        return self._s


def compensated_complex_sum(terms) -> complex:
    """Exactly rounded sum of an iterable of complex scalars (fsum per part)."""
    ts = [complex(t) for t in terms]
    return complex(math.fsum(t.real for t in ts), math.fsum(t.imag for t in ts))


# ---------------------------------------------------------------------------
# Laguerre polynomials
# ---------------------------------------------------------------------------

def laguerre(k: int, x: float) -> float:
    """Laguerre polynomial L_k(x) = sum_{m=0}^{k} (-x)^m/(m!)^2 * k!/(k-m)!.

    Evaluated with the three-term recurrence
        (j+1) L_{j+1} = (2j+1-x) L_j - j L_{j-1},
    which is forward-stable on x >= 0, the only region the propagator
    needs (its arguments are nonnegative multiples of rescaled time).
    """
    if k < 0:
        raise ValueError(f"polynomial degree must be >= 0, got {k}")
    if k == 0:
        return 1.0
    prev, cur = 1.0, 1.0 - x
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1 - x) * cur - j * prev) / (j + 1)
    return cur


def laguerre_series(k: int, x: float) -> float:
    """L_k(x) by the raw alternating finite series, fsum-compensated.

    Cross-check path only: the alternating terms lose digits for large k*x,
    so keep k <= 20 or so.  The recurrence in laguerre() is the main path.
    """
    if k < 0:
        raise ValueError(f"polynomial degree must be >= 0, got {k}")
    terms = []
    t = 1.0
    for m in range(k + 1):
        if m > 0:
            t *= -x / m * (k - m + 1) / m
        terms.append(t)
    return math.fsum(terms)


def laguerre_d1(k: int, x: float) -> float:
    """First derivative dL_k/dx, by the differentiated recurrence.

    Note the sign convention: this is the plain derivative of L_k, which
    equals minus the conventional associated polynomial L_{k-1}^{(1)}.
    laguerre_d1(k, 0) == -k for every k >= 1.
    """
    if k < 1:
        raise ValueError(f"degree must be >= 1 for the derivative, got {k}")
    if k == 1:
        return -1.0
    lp, lc = 1.0, 1.0 - x
    dp, dc = 0.0, -1.0
    for j in range(1, k):
        lp, lc, dp, dc = (
            lc,
            ((2 * j + 1 - x) * lc - j * lp) / (j + 1),
            dc,
            ((2 * j + 1 - x) * dc - lc - j * dp) / (j + 1),
        )
    return dc


# ---------------------------------------------------------------------------
# Integer-order incomplete gamma, complex argument
# ---------------------------------------------------------------------------

def gamma_upper_int_ladder(m_max: int, z) -> np.ndarray:
    """Upper incomplete gamma ladder Gamma(j+1, z) for j = 0..m_max.

    Uses the exact finite identity Gamma(m+1, z) = m! e^{-z} sum_{j<=m} z^j/j!,
    valid for any complex z.  Returns an array of shape (m_max+1,) + z.shape;
    the whole ladder shares one exponential and one cumulative series.
    """
    if m_max < 0:
        raise ValueError(f"order must be >= 0, got {m_max}")
    z = np.asarray(z, dtype=complex)
    out = np.empty((m_max + 1,) + z.shape, dtype=complex)
    ez = np.exp(-z)
    term = np.ones_like(z)
    series = KahanSum(z.shape)
    series.add(term)
    out[0] = ez
    fact = 1.0
    for j in range(1, m_max + 1):
        term = term * z / j
        series.add(term)
        fact *= j
        out[j] = fact * ez * series.total
    return out


def gamma_upper_int(m: int, z):
    """Gamma(m+1, z) = integral_z^inf t^m e^{-t} dt for integer m >= 0, complex z."""
    res = gamma_upper_int_ladder(m, z)[m]
    return complex(res) if res.ndim == 0 else res


def gamma_lower_int_ladder(m_max: int, z) -> np.ndarray:
    """Lower incomplete gamma ladder gamma(j+1, z) = j! - Gamma(j+1, z), j = 0..m_max.

    The direct subtraction cancels badly when |z| is small (both sides tend
    to j!), so elements with |z| <= m_max + 2 are recomputed from the tail
    series gamma(j+1, z) = j! e^{-z} sum_{i > j} z^i / i!, which has no
    cancellation against j!.
    """
    if m_max < 0:
        raise ValueError(f"order must be >= 0, got {m_max}")
    z = np.asarray(z, dtype=complex)
    facts = [float(math.factorial(j)) for j in range(m_max + 1)]
    upper = gamma_upper_int_ladder(m_max, z)
    out = np.empty_like(upper)
    for j in range(m_max + 1):
        out[j] = facts[j] - upper[j]

    small = np.abs(z) <= m_max + 2.0
    if np.any(small):
        zs = z[small] if z.ndim else z.reshape(1)[:1]
        ez = np.exp(-zs)
        # prefix terms t_i = z^i/i! for i = 1..m_max
        t = np.ones_like(zs)
        prefix = []
        for i in range(1, m_max + 1):
            t = t * zs / i
            prefix.append(t)
        # tail T_{m_max} = sum_{i > m_max} z^i/i!, summed upward until it stalls
        tail = KahanSum(zs.shape)
        term = t.copy()
        i = m_max
        for _ in range(400):
            i += 1
            term = term * zs / i
            tail.add(term)
            if np.max(np.abs(term)) <= 1e-18 * max(np.max(np.abs(tail.total)), 1e-300):
                break
        lower = facts[m_max] * ez * tail.total
        if z.ndim:
            out[m_max][small] = lower
        else:
            out[m_max] = lower[0]
        # descend: T_{j-1} = T_j + t_j
        running = tail
        for j in range(m_max - 1, -1, -1):
            running.add(prefix[j])
            lower = facts[j] * ez * running.total
            if z.ndim:
                out[j][small] = lower
            else:
                out[j] = lower[0]
    return out


def gamma_lower_int(m: int, z):
    """gamma(m+1, z) = m! - Gamma(m+1, z), cancellation-safe for small |z|."""
    res = gamma_lower_int_ladder(m, z)[m]
    return complex(res) if res.ndim == 0 else res


# ---------------------------------------------------------------------------
# (e^x - 1) / x
# ---------------------------------------------------------------------------

_EXPM1_TERMS = 16


def expm1_ratio(x):
    """(e^x - 1)/x with the removable singularity filled in: value 1 at x = 0.

    Complex-safe and uniformly accurate: |x| < 1/2 uses the Taylor series
    sum_j x^j/(j+1)!, larger |x| the direct quotient (no cancellation there,
    |e^x - 1| >= 1 - e^{-1/2}).  Relative error a few ulp everywhere.
    """
    scalar = np.isscalar(x) or getattr(x, "ndim", 0) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=complex))
    out = np.empty_like(xa)
    small = np.abs(xa) < 0.5
    if np.any(~small):
        xb = xa[~small]
        out[~small] = (np.exp(xb) - 1.0) / xb
    if np.any(small):
        xs = xa[small]
        term = np.ones_like(xs)
        acc = KahanSum(xs.shape)
        acc.add(term)
        for j in range(2, _EXPM1_TERMS):
            term = term * xs / j
            acc.add(term)
        out[small] = acc.total
    return complex(out[0]) if scalar else out
