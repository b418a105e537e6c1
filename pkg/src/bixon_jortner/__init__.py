"""Quasi-continuum level-coupling dynamics (Bixon-Jortner model).

Closed-form propagation of a single level coupled with uniform strength to
an infinite ladder of equally spaced levels, an independent brute-force
integrator to verify it, and the derived observables: Leggett-Garg
correlators with projective collapse, relative entropy of coherence, the
Lorentzian limiting profile, and detuning-transformation invariances.
"""

from .model import (
    DerivedParams,
    InitialState,
    ModelParams,
    StateVector,
    derive_params,
    norm_tolerance,
    survival_probability,
)
from .observables import (
    LGResult,
    LeggettGargEvaluator,
    TimeSeries,
    c21,
    c31,
    c32,
    coherence_series,
    collapse_to_quasicontinuum,
    interval_sum,
    k3_series,
    k3prime_series,
    lg_curve,
    lg_interval_summary,
    rel_entropy_coherence,
    time_average,
    transform_detuning,
)
from .oracle import (
    IntegratorConfig,
    OracleDeviation,
    compare_to_analytic,
    energy_expectation,
    integrate,
    integrate_path,
    rhs,
)
from .solution import (
    ClosedFormSolution,
    KappaTable,
    b_general,
    b_special_zero_detuning,
    c_general,
    evolve_state,
    first_window_b,
    first_window_c,
    lorentzian_profile,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "DerivedParams",
    "InitialState",
    "StateVector",
    "derive_params",
    "survival_probability",
    "norm_tolerance",
    "KappaTable",
    "ClosedFormSolution",
    "b_general",
    "c_general",
    "evolve_state",
    "b_special_zero_detuning",
    "first_window_b",
    "first_window_c",
    "lorentzian_profile",
    "IntegratorConfig",
    "OracleDeviation",
    "rhs",
    "integrate",
    "integrate_path",
    "compare_to_analytic",
    "energy_expectation",
    "LGResult",
    "TimeSeries",
    "LeggettGargEvaluator",
    "c21",
    "c31",
    "c32",
    "lg_curve",
    "k3_series",
    "k3prime_series",
    "collapse_to_quasicontinuum",
    "rel_entropy_coherence",
    "coherence_series",
    "transform_detuning",
    "interval_sum",
    "time_average",
    "lg_interval_summary",
    "__version__",
]
