"""Physical parameters, derived constants, and state containers.

Conventions shared by every other module:
  * hbar = 1 throughout.
  * The single level |g> sits at detuning delta_g; the quasi-continuum
    levels |n>, n in [-n_max, n_max], sit at n*delta; every |n> couples
    to |g> with the same strength w.
  * Rescaled time T = delta * t / (2*pi) is the canonical time coordinate
    (grids, CSV, APIs); physical time appears only inside formulas as
    t = gamma * T.  Kicks happen at integer T.

All containers are immutable value objects; they may be shared freely
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "DerivedParams",
    "InitialState",
    "StateVector",
    "derive_params",
    "survival_probability",
    "norm_tolerance",
]


@dataclass(frozen=True)
class ModelParams:
    """Model constants plus the two numeric controls.

    delta_g : detuning of the single level (angular frequency)
    delta   : quasi-continuum spacing, > 0
    w       : uniform coupling strength (w = 0 is the decoupled trivial case)
    n_max   : basis truncation, levels n in [-n_max, +n_max]
    k_max   : kick-series cutoff; every kick term carries a step H(T - k),
              so the truncated sum is exact for all T < k_max + 1
    """

    delta_g: float
    delta: float
    w: float
    n_max: int = 1000
    k_max: int = 8

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"level spacing must be positive, got {self.delta}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")


@dataclass(frozen=True)
class DerivedParams:
    """Constants derived from ModelParams; never stored stale, always recomputed.

    alpha = 2 pi w^2 / delta
    gamma = 2 pi / delta        (physical time per unit rescaled time)
    beta  = 2 pi^2 w^2 / delta^2
    """

    alpha: float
    gamma: float
    beta: float


def derive_params(p: ModelParams) -> DerivedParams:
    """Compute alpha, gamma, beta from the model constants."""
    if not p.delta > 0:
        raise ValueError(f"level spacing must be positive, got {p.delta}")
    return DerivedParams(
        alpha=2.0 * math.pi * p.w**2 / p.delta,
        gamma=2.0 * math.pi / p.delta,
        beta=2.0 * math.pi**2 * p.w**2 / p.delta**2,
    )


def _as_level_arrays(levels, amps):
    lv = np.asarray(levels, dtype=np.int64).ravel()
    am = np.asarray(amps, dtype=complex).ravel()
    if lv.shape != am.shape:
        raise ValueError("levels and amplitudes must have matching length")
    order = np.argsort(lv)
    lv, am = lv[order], am[order]
    if lv.size > 1 and np.any(np.diff(lv) == 0):
        raise ValueError("duplicate quasi-continuum levels in initial state")
    lv.setflags(write=False)
    am.setflags(write=False)
    return lv, am


_NORM_TOL_CONSTRUCT = 1e-12


@dataclass(frozen=True, eq=False)
class InitialState:
    """t = 0 amplitudes: b0 on the single level, c0 on the quasi-continuum.

    The quasi-continuum part is stored sparsely as (levels, amps); levels
    outside the support carry amplitude zero.  Must be normalized:
    |b0|^2 + sum |c0|^2 = 1 within 1e-12.
    """

    b0: complex
    levels: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        lv, am = _as_level_arrays(self.levels, self.amps)
        object.__setattr__(self, "b0", complex(self.b0))
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "amps", am)
        total = math.fsum([abs(self.b0) ** 2] + list(np.abs(am) ** 2))
        if abs(total - 1.0) > _NORM_TOL_CONSTRUCT:
            raise ValueError(
                f"initial state must be normalized: |b0|^2 + sum|c0|^2 = {total!r}"
            )

    @classmethod
    def ground(cls) -> "InitialState":
        """b(0) = 1, all c_n(0) = 0."""
        return cls(1.0, np.array([], dtype=np.int64), np.array([], dtype=complex))

    @classmethod
    def from_mapping(cls, b0: complex, c0) -> "InitialState":
        """Build from b0 and a mapping {level n: amplitude}."""
        items = sorted(c0.items())
        levels = [n for n, _ in items]
        amps = [a for _, a in items]
        return cls(b0, np.array(levels, dtype=np.int64), np.array(amps, dtype=complex))

    def amplitude(self, n: int) -> complex:
        """c0 amplitude on level n (zero off the support)."""
        idx = np.searchsorted(self.levels, n)
        if idx < self.levels.size and self.levels[idx] == n:
            return complex(self.amps[idx])
        return 0.0 + 0.0j

    def max_level(self) -> int:
        return int(np.max(np.abs(self.levels))) if self.levels.size else 0

    def scaled_by_phase(self, phase: complex) -> "InitialState":
        return InitialState(self.b0 * phase, self.levels, self.amps * phase)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes at one rescaled time over the truncated basis.

    c[i] is the amplitude of level n = i - n_max, i.e. c spans
    [-n_max, +n_max] in ascending level order.
    """

    t_rescaled: float
    b: complex
    c: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.c, dtype=complex).ravel()
        if arr.size % 2 == 0:
            raise ValueError("c must cover [-n_max, n_max], an odd number of levels")
        arr.setflags(write=False)
        object.__setattr__(self, "b", complex(self.b))
        object.__setattr__(self, "c", arr)

    @property
    def n_max(self) -> int:
        return (self.c.size - 1) // 2

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def c_of(self, n: int) -> complex:
        if abs(n) > self.n_max:
            raise ValueError(f"level {n} outside truncation +-{self.n_max}")
        return complex(self.c[n + self.n_max])

    def probability_sum(self) -> float:
        """|b|^2 + sum |c_n|^2 over the truncated basis (fsum-exact)."""
        return math.fsum([abs(self.b) ** 2] + list(np.abs(self.c) ** 2))


def survival_probability(s: StateVector) -> float:
    """|b|^2, the probability of remaining on the single level."""
    return abs(s.b) ** 2


def norm_tolerance(p: ModelParams) -> float:
    """Truncation allowance for the probability sum of a closed-form state.

    The closed forms live on the infinite basis; the truncated sum is short
    by the Lorentzian tail ~ 2 w^2 / (delta^2 n_max).  Calibrated so the
    allowance is 5e-3 at (w=0.4, delta=1, n_max=1000) and tightens in
    proportion as n_max grows.
    """
    return max(31.25 * p.w**2 / (p.delta**2 * p.n_max), 1e-12)
