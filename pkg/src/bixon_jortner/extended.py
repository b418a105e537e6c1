"""Extended-precision twin of the closed-form evaluator (mpmath backend).

Same finite series as solution.py, evaluated in arbitrary precision.  Slow
by construction; its job is to certify the double-precision tolerances at
spot points and to back the CLI's extended precision mode, not to run full
grids.  Default working precision is 40 significant digits.
"""

from __future__ import annotations

import math

import mpmath as mp

from .model import InitialState, ModelParams
from .special import expm1_ratio  # noqa: F401  (double twin, same contract)

__all__ = [
    "DEFAULT_DPS",
    "laguerre_d1_mp",
    "gamma_upper_int_mp",
    "gamma_lower_int_mp",
    "expm1_ratio_mp",
    "b_general_mp",
    "c_general_mp",
]

DEFAULT_DPS = 40


def laguerre_d1_mp(k: int, x) -> mp.mpf:
    """dL_k/dx by the differentiated recurrence, in working precision."""
    if k < 1:
        raise ValueError(f"degree must be >= 1 for the derivative, got {k}")
    x = mp.mpf(x)
    lp, lc = mp.mpf(1), 1 - x
    dp, dc = mp.mpf(0), mp.mpf(-1)
    for j in range(1, k):
        lp, lc, dp, dc = (
            lc,
            ((2 * j + 1 - x) * lc - j * lp) / (j + 1),
            dc,
            ((2 * j + 1 - x) * dc - lc - j * dp) / (j + 1),
        )
    return dc


def gamma_upper_int_mp(m: int, z) -> mp.mpc:
    """Gamma(m+1, z) = m! e^{-z} sum_{j<=m} z^j/j! for complex z."""
    if m < 0:
        raise ValueError(f"order must be >= 0, got {m}")
    z = mp.mpc(z)
    term = mp.mpc(1)
    series = mp.mpc(1)
    for j in range(1, m + 1):
        term = term * z / j
        series += term
    return mp.factorial(m) * mp.e**(-z) * series


def gamma_lower_int_mp(m: int, z) -> mp.mpc:
    """m! - Gamma(m+1, z); precision absorbs the small-|z| cancellation."""
    return mp.factorial(m) - gamma_upper_int_mp(m, z)


def expm1_ratio_mp(x) -> mp.mpc:
    """(e^x - 1)/x with value 1 at x = 0."""
    x = mp.mpc(x)
    if x == 0:
        return mp.mpc(1)
    return mp.expm1(x) / x


def _derived_mp(params: ModelParams):
    g = 2 * mp.pi / mp.mpf(params.delta)
    a = 2 * mp.pi * mp.mpf(params.w) ** 2 / mp.mpf(params.delta)
    return g, a


def _kappa_mp(params: ModelParams, n: int) -> mp.mpc:
    return mp.mpc(
        mp.pi * mp.mpf(params.w) ** 2 / mp.mpf(params.delta),
        mp.mpf(params.delta_g) - n * mp.mpf(params.delta),
    )


def _check_time(params: ModelParams, t) -> None:
    if t < 0:
        raise ValueError(f"rescaled time must be >= 0, got {t}")
    if not t < params.k_max + 1:
        raise ValueError(
            f"k_max={params.k_max} only covers T < {params.k_max + 1}; requested T={t}"
        )


def b_general_mp(params: ModelParams, init: InitialState, t, dps: int = DEFAULT_DPS) -> complex:
    """Survival amplitude b(T) in extended precision, rounded to complex."""
    _check_time(params, t)
    with mp.workdps(dps):
        t = mp.mpf(t)
        g, a = _derived_mp(params)
        w = mp.mpf(params.w)
        b0 = mp.mpc(init.b0)
        if params.w == 0.0:
            val = b0 * mp.e**(-1j * mp.mpf(params.delta_g) * g * t)
            return complex(val)
        k0 = _kappa_mp(params, 0)
        kicks = min(int(math.floor(t)), params.k_max)
        total = b0 * mp.e**(-k0 * g * t)
        for k in range(1, kicks + 1):
            tk = t - k
            total += b0 * a * (g * tk / k) * laguerre_d1_mp(k, a * g * tk) * mp.e**(-k0 * g * tk)
        for lev, amp in zip(init.levels, init.amps):
            lev = int(lev)
            cl = mp.mpc(amp)
            kl = _kappa_mp(params, lev)
            phase = mp.e**(-2j * mp.pi * lev * t)
            total += 1j * w * cl / kl * phase * (mp.e**(-kl * g * t) - 1)
            for k in range(1, kicks + 1):
                tk = t - k
                for m in range(1, k + 1):
                    coef = mp.mpf(math.comb(k - 1, m - 1)) / mp.factorial(m)
                    total += (
                        1j * w * cl * coef * (-a) ** m * phase
                        * kl ** (-m - 1) * gamma_upper_int_mp(m, kl * g * tk)
                    )
                total += 1j * w * a * cl * (kl - a) ** (k - 1) * kl ** (-k - 1) * phase
        return complex(total)


def c_general_mp(
    params: ModelParams, init: InitialState, n: int, t, dps: int = DEFAULT_DPS
) -> complex:
    """Quasi-continuum amplitude c_n(T) in extended precision."""
    _check_time(params, t)
    if abs(n) > params.n_max:
        raise ValueError(f"level {n} outside truncation +-{params.n_max}")
    with mp.workdps(dps):
        t = mp.mpf(t)
        g, a = _derived_mp(params)
        w = mp.mpf(params.w)
        d = mp.mpf(params.delta)
        b0 = mp.mpc(init.b0)
        phase_n = mp.e**(-2j * mp.pi * n * t)
        if params.w == 0.0:
            return complex(mp.mpc(init.amplitude(n)) * phase_n)
        k0 = _kappa_mp(params, 0)
        kn = _kappa_mp(params, n)
        kicks = min(int(math.floor(t)), params.k_max)
        total = -1j * w * b0 / kn * (phase_n - mp.e**(-k0 * g * t))
        total += mp.mpc(init.amplitude(n)) * phase_n
        for k in range(1, kicks + 1):
            tk = t - k
            total += 1j * w * b0 * a * kn**-2 * (1 - a / kn) ** (k - 1) * phase_n
            for m in range(1, k + 1):
                coef = mp.mpf(math.comb(k - 1, m - 1)) / mp.factorial(m)
                total += (
                    1j * w * b0 * coef * (-a) ** m * kn ** (-m - 1) * phase_n
                    * gamma_upper_int_mp(m, kn * g * tk)
                )
        for lev, amp in zip(init.levels, init.amps):
            lev = int(lev)
            cl = mp.mpc(amp)
            kl = _kappa_mp(params, lev)
            kt = kl + 1j * (lev - n) * d
            total += w**2 * cl / kl * (
                -g * t * phase_n * expm1_ratio_mp(-2j * mp.pi * (lev - n) * t)
                + (phase_n - mp.e**(-(kl + 1j * lev * d) * g * t)) / kt
            )
            for k in range(1, kicks + 1):
                tk = t - k
                for m in range(1, k + 1):
                    coef = mp.mpf(math.comb(k - 1, m - 1))
                    inner = mp.mpc(0)
                    for j in range(m + 1):
                        inner += (
                            kl**j / mp.factorial(j) * kt ** (-j - 1)
                            * gamma_lower_int_mp(j, kt * g * tk)
                        )
                    total += w**2 * cl * coef * (-a) ** m * kl ** (-m - 1) * phase_n * inner
                total += (
                    w**2 * a * cl * (kl - a) ** (k - 1) * kl ** (-k - 1) * g * tk
                    * phase_n * expm1_ratio_mp(-2j * mp.pi * (lev - n) * tk)
                )
        return complex(total)
