"""Closed-form propagation of the coupled level / quasi-continuum system.

The survival amplitude b(T) and every quasi-continuum amplitude c_n(T) have
exact finite expressions for arbitrary normalized initial data and arbitrary
detuning.  Both consist of smooth free-evolution pieces plus a sum of kick
terms gated by Heaviside steps H(T - k), one per integer rescaled time k;
the step-gated terms vanish continuously at T = k, so the kicks show up as
derivative (not value) discontinuities.

Structure used throughout, with gamma = 2 pi / delta, alpha = 2 pi w^2/delta:

  kappa_n       = pi w^2/delta + i (delta_g - n delta)        (Re > 0 for w != 0)
  kappa~_{l,n}  = kappa_l + i (l - n) delta                    (= kappa_n at l = 0)

Two stability facts the code relies on:
  * Re kappa = alpha/2 exactly, so the ratios (kappa - alpha)/kappa that
    drive the k-th kick terms are unimodular: their powers never grow.
  * exp(-2 pi i n (T - k)) == exp(-2 pi i n T) for integer n, k, so one
    phase array per evaluation serves every kick term.

All k/m accumulations are compensated (fsum for scalars, elementwise Kahan
for arrays).
"""

from __future__ import annotations

import cmath
import math
from functools import lru_cache

import numpy as np

from .model import (
    DerivedParams,
    InitialState,
    ModelParams,
    StateVector,
    derive_params,
)
from .special import (
    KahanSum,
    compensated_complex_sum,
    expm1_ratio,
    gamma_lower_int_ladder,
    gamma_upper_int_ladder,
    laguerre_d1,
)

__all__ = [
    "KappaTable",
    "ClosedFormSolution",
    "b_general",
    "c_general",
    "evolve_state",
    "b_special_zero_detuning",
    "first_window_b",
    "first_window_c",
    "lorentzian_profile",
]

_TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=None)
def _kick_tables(k_max: int):
    """Exact combinatorial weights of the kick sums.

    c_table[k][m] = (k-1)! / ((k-m)! (m-1)! m!)    (m-compressed form)
    d_table[k][m] = (k-1)! / ((k-m)! (m-1)!)       (j-expanded form)
    Index 0 of each row is unused padding.
    """
    c_table = [()]
    d_table = [()]
    for k in range(1, k_max + 1):
        d_row = [0.0]
        c_row = [0.0]
        for m in range(1, k + 1):
            d = math.comb(k - 1, m - 1)  # == (k-1)! / ((k-m)! (m-1)!)
            d_row.append(float(d))
            c_row.append(d / math.factorial(m))
        c_table.append(tuple(c_row))
        d_table.append(tuple(d_row))
    return tuple(c_table), tuple(d_table)


class KappaTable:
    """Per-level complex rates kappa_n and the shifted kappa~_{l,n}.

    Immutable and shareable; the full array over [-n_max, n_max] is built
    on first access.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.re = math.pi * params.w**2 / params.delta
        self._values = None

    def kappa(self, n):
        """kappa_n for scalar or array n."""
        val = self.re + 1j * (self.params.delta_g - np.asarray(n) * self.params.delta)
        return complex(val) if np.ndim(val) == 0 else val

    def kappa_tilde(self, l: int, n):
        """kappa~_{l,n} = kappa_l + i (l - n) delta for scalar or array n."""
        val = self.kappa(l) + 1j * (l - np.asarray(n)) * self.params.delta
        return complex(val) if np.ndim(val) == 0 else val

    @property
    def values(self) -> np.ndarray:
        """kappa_n over the full truncated basis, ascending n."""
        if self._values is None:
            n = np.arange(-self.params.n_max, self.params.n_max + 1)
            v = self.kappa(n)
            v.setflags(write=False)
            self._values = v
        return self._values


class ClosedFormSolution:
    """Evaluates b(T) and c_n(T) for one (params, initial state) pair.

    Pure function of construction arguments; safe to call concurrently.
    ``laguerre_sign_flip`` is a validation hook that negates the Laguerre
    derivative inside the survival kick terms; it exists so the oracle
    comparison can demonstrate that it catches a wrong sign convention.
    """

    def __init__(
        self,
        params: ModelParams,
        init: InitialState,
        *,
        laguerre_sign_flip: bool = False,
    ):
        if init.max_level() > params.n_max:
            raise ValueError(
                f"initial support reaches level {init.max_level()}, "
                f"outside truncation +-{params.n_max}"
            )
        self.params = params
        self.init = init
        self.derived = derive_params(params)
        self.kappas = KappaTable(params)
        self._lag_sign = -1.0 if laguerre_sign_flip else 1.0
        self._b0 = complex(init.b0)
        self._l = init.levels
        self._cl = init.amps
        self._kl = self.kappas.kappa(self._l) if self._l.size else np.empty(0, complex)
        if params.w != 0.0 and self._l.size:
            self._rl = (self._kl - self.derived.alpha) / self._kl
        else:
            self._rl = np.empty(0, complex)
        self._c_tab, self._d_tab = _kick_tables(params.k_max)
        a = self.derived.alpha
        self._neg_a_pow = [1.0]
        for _ in range(params.k_max):
            self._neg_a_pow.append(self._neg_a_pow[-1] * (-a))

    # -- time bookkeeping ---------------------------------------------------

    def _check_time(self, t: float) -> None:
        if t < 0:
            raise ValueError(f"rescaled time must be >= 0, got {t}")
        if not t < self.params.k_max + 1:
            raise ValueError(
                f"k_max={self.params.k_max} only covers T < {self.params.k_max + 1}; "
                f"requested T={t}"
            )

    def _active_kicks(self, t: float) -> int:
        # H(T - k) at T == k counts as 1; the k-th term vanishes there anyway.
        return min(int(math.floor(t)), self.params.k_max)

    # -- survival amplitude ---------------------------------------------------

    def b(self, t: float) -> complex:
        """Survival amplitude b(T) at rescaled time t."""
        self._check_time(t)
        p, d = self.params, self.derived
        if p.w == 0.0:
            return self._b0 * cmath.exp(-1j * p.delta_g * d.gamma * t)
        g, a, w = d.gamma, d.alpha, p.w
        k0 = self.kappas.kappa(0)
        pieces = [self._b0 * cmath.exp(-k0 * g * t)]
        for k in range(1, self._active_kicks(t) + 1):
            tk = t - k
            lag = self._lag_sign * laguerre_d1(k, a * g * tk)
            pieces.append(self._b0 * a * (g * tk / k) * lag * cmath.exp(-k0 * g * tk))
        if self._l.size:
            kl = self._kl
            phase = np.exp(-1j * _TWO_PI * self._l * t)
            per_level = KahanSum(kl.shape)
            per_level.add(1j * w / kl * (np.exp(-kl * g * t) - 1.0))
            r_pow = np.ones_like(kl)
            for k in range(1, self._active_kicks(t) + 1):
                tk = t - k
                upper = gamma_upper_int_ladder(k, kl * (g * tk))
                k_pow = 1.0 / kl
                for m in range(1, k + 1):
                    k_pow = k_pow / kl
                    per_level.add(
                        1j * w * self._c_tab[k][m] * self._neg_a_pow[m] * k_pow * upper[m]
                    )
                per_level.add(1j * w * a * r_pow / (kl * kl))
                r_pow = r_pow * self._rl
            pieces.extend(self._cl * phase * per_level.total)
        return compensated_complex_sum(pieces)

    # -- quasi-continuum amplitudes -------------------------------------------

    def c_levels(self, n, t: float) -> np.ndarray:
        """c_n(T) for an array of levels n, at rescaled time t."""
        self._check_time(t)
        n = np.asarray(n, dtype=np.int64)
        p, d = self.params, self.derived
        if np.any(np.abs(n) > p.n_max):
            raise ValueError(f"levels outside truncation +-{p.n_max}")
        phase_n = np.exp(-1j * _TWO_PI * n * t)
        if p.w == 0.0:
            return self._amps_on(n) * phase_n
        g, a, w = d.gamma, d.alpha, p.w
        k0 = self.kappas.kappa(0)
        kn = self.kappas.kappa(n)  # == kappa~_{0,n}
        e_k0 = cmath.exp(-k0 * g * t)
        acc = KahanSum(n.shape)
        acc.add(-1j * w * self._b0 / kn * (phase_n - e_k0))
        acc.add(self._amps_on(n) * phase_n)
        for l, cl, kl in zip(self._l, self._cl, self._kl):
            kt = kl + 1j * (l - n) * p.delta
            ratio = expm1_ratio(-1j * _TWO_PI * (l - n) * t)
            e_l = cmath.exp(-(kl + 1j * l * p.delta) * g * t)
            acc.add(w * w * cl / kl * (-g * t * phase_n * ratio + (phase_n - e_l) / kt))
        kicks = self._active_kicks(t)
        if kicks and self._b0 != 0.0:
            rn_pow = np.ones_like(kn)
            rn = (kn - a) / kn
            for k in range(1, kicks + 1):
                tk = t - k
                upper = gamma_upper_int_ladder(k, kn * (g * tk))
                acc.add(1j * w * self._b0 * a / (kn * kn) * rn_pow * phase_n)
                rn_pow = rn_pow * rn
                k_pow = 1.0 / kn
                for m in range(1, k + 1):
                    k_pow = k_pow / kn
                    acc.add(
                        1j * w * self._b0 * self._c_tab[k][m] * self._neg_a_pow[m]
                        * k_pow * phase_n * upper[m]
                    )
        if kicks and self._l.size:
            for l, cl, kl, rl in zip(self._l, self._cl, self._kl, self._rl):
                kt = kl + 1j * (l - n) * p.delta
                kt_inv = 1.0 / kt
                for k in range(1, kicks + 1):
                    tk = t - k
                    lower = gamma_lower_int_ladder(k, kt * (g * tk))
                    inner = KahanSum(n.shape)
                    inner.add(kt_inv * lower[0])
                    kl_fact = 1.0  # kappa_l^j / j!
                    kt_pow = kt_inv
                    kl_pow = 1.0 / kl
                    for m in range(1, k + 1):
                        kl_fact *= kl / m
                        kt_pow = kt_pow * kt_inv
                        inner.add(kl_fact * kt_pow * lower[m])
                        kl_pow = kl_pow / kl
                        acc.add(
                            w * w * cl * self._d_tab[k][m] * self._neg_a_pow[m]
                            * kl_pow * phase_n * inner.total
                        )
                    acc.add(
                        w * w * a * cl * rl ** (k - 1) / (kl * kl) * (g * tk)
                        * phase_n * expm1_ratio(-1j * _TWO_PI * (l - n) * tk)
                    )
        return acc.total

    def c(self, n: int, t: float) -> complex:
        """Single amplitude c_n(T)."""
        return complex(self.c_levels(np.array([n]), t)[0])

    def c_all(self, t: float) -> np.ndarray:
        """All amplitudes over [-n_max, n_max], ascending n."""
        n = np.arange(-self.params.n_max, self.params.n_max + 1)
        return self.c_levels(n, t)

    def state(self, t: float) -> StateVector:
        """Full StateVector at rescaled time t."""
        return StateVector(t_rescaled=t, b=self.b(t), c=self.c_all(t))

    # -- internals ------------------------------------------------------------

    def _amps_on(self, n: np.ndarray) -> np.ndarray:
        """Initial amplitudes c_n(0) gathered onto the requested levels."""
        out = np.zeros(n.shape, dtype=complex)
        if self._l.size:
            idx = np.searchsorted(self._l, n)
            idx_clip = np.minimum(idx, self._l.size - 1)
            hit = self._l[idx_clip] == n
            out[hit] = self._cl[idx_clip[hit]]
        return out


# ---------------------------------------------------------------------------
# Module-level operation surface
# ---------------------------------------------------------------------------

def b_general(params: ModelParams, init: InitialState, t: float) -> complex:
    """General closed-form survival amplitude b(T).

    Independent of n_max except through which c_n(0) are nonzero: the level
    sums run over the initial support only.
    """
    return ClosedFormSolution(params, init).b(t)


def c_general(params: ModelParams, init: InitialState, n: int, t: float) -> complex:
    """General closed-form quasi-continuum amplitude c_n(T)."""
    return ClosedFormSolution(params, init).c(n, t)


def evolve_state(params: ModelParams, init: InitialState, t: float) -> StateVector:
    """Closed-form state at rescaled time t over the full truncated basis."""
    return ClosedFormSolution(params, init).state(t)


def b_special_zero_detuning(params: ModelParams, t: float) -> complex:
    """Zero-detuning survival amplitude from the reduced single-sum form.

    b(T) = e^{-beta T} (1 + 2 beta sum_k e^{beta k} ((T-k)/k) H(T-k)
                                     dL_k/dx[2 beta (T-k)])

    Valid only for delta_g = 0 with the ground initial state; kept as an
    independent second formula path and cross-checked against b_general.
    """
    if params.delta_g != 0.0:
        raise ValueError("the reduced form requires zero detuning")
    if t < 0:
        raise ValueError(f"rescaled time must be >= 0, got {t}")
    if not t < params.k_max + 1:
        raise ValueError(
            f"k_max={params.k_max} only covers T < {params.k_max + 1}; requested T={t}"
        )
    beta = derive_params(params).beta
    pieces = [1.0]
    for k in range(1, min(int(math.floor(t)), params.k_max) + 1):
        tk = t - k
        pieces.append(
            2.0 * beta * math.exp(beta * k) * (tk / k) * laguerre_d1(k, 2.0 * beta * tk)
        )
    return math.exp(-beta * t) * math.fsum(pieces)


def first_window_b(params: ModelParams, t: float) -> complex:
    """Ground-init b(T) = e^{-kappa_0 gamma T} on the pre-kick window T in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"first-window form only holds for T in [0, 1], got {t}")
    d = derive_params(params)
    k0 = KappaTable(params).kappa(0)
    return cmath.exp(-k0 * d.gamma * t)


def first_window_c(params: ModelParams, n: int, t: float) -> complex:
    """Ground-init c_n(T) on T in [0, 1].

    c_n = -i w kappa_n^{-1} (e^{-2 pi i n T} - e^{-kappa_0 gamma T}); at
    w = 0 both the prefactor and the propagated amplitude vanish.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"first-window form only holds for T in [0, 1], got {t}")
    if params.w == 0.0:
        return 0.0 + 0.0j
    d = derive_params(params)
    table = KappaTable(params)
    k0 = table.kappa(0)
    kn = table.kappa(n)
    return -1j * params.w / kn * (
        cmath.exp(-1j * _TWO_PI * n * t) - cmath.exp(-k0 * d.gamma * t)
    )


def lorentzian_profile(params: ModelParams, n: int) -> float:
    """Limiting occupation |c_n|^2 ~ w^2 / ((pi w^2/delta)^2 + (delta_g - n delta)^2).

    Reached from the ground state near the first kick as the spacing shrinks;
    peaks at the integer nearest delta_g / delta.
    """
    num = params.w**2
    return num / ((math.pi * num / params.delta) ** 2 + (params.delta_g - n * params.delta) ** 2)
