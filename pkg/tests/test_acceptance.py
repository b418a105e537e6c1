"""Acceptance gate: every release-blocking criterion at its stated tolerance.

Each test prints one PASS/FAIL line (bypassing capture) with the measured
values, then asserts.  The heavy series are computed once per module and
shared across criteria.
"""

import math
import warnings
from dataclasses import replace

import numpy as np
import pytest

import conftest

from bixon_jortner import (
    ClosedFormSolution,
    InitialState,
    IntegratorConfig,
    LeggettGargEvaluator,
    ModelParams,
    TimeSeries,
    b_special_zero_detuning,
    coherence_series,
    compare_to_analytic,
    derive_params,
    interval_sum,
    lg_curve,
    lg_interval_summary,
    lorentzian_profile,
    norm_tolerance,
    rel_entropy_coherence,
    time_average,
    transform_detuning,
)

from conftest import random_initial_state

GRID_8 = np.linspace(0.0, 8.0, 1601)  # 1600 intervals, dT = 0.005


def _report(criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)


def _params(dg: float) -> ModelParams:
    return ModelParams(delta_g=dg, delta=1.0, w=0.4, n_max=1000, k_max=16)


@pytest.fixture(scope="module")
def lg_data():
    """LG correlator rows over GRID_8, computed once per detuning."""
    cache = {}

    def get(dg: float):
        if dg not in cache:
            p = _params(dg)
            ev = LeggettGargEvaluator(p)
            rows = lg_curve(p, GRID_8)
            cache[dg] = (p, ev, rows)
        return cache[dg]

    return get


def _violation_sum(ev, rows, attr: str) -> float:
    series = TimeSeries(
        GRID_8,
        np.array([getattr(r, attr) for r in rows]),
        fn=lambda t: getattr(ev.correlators(t), attr),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return interval_sum(series, 1.0, "above")


# ---------------------------------------------------------------------------
# 1. K3 violation-interval regression
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_01_k3_interval_sums(lg_data):
    p0, ev0, rows0 = lg_data(0.0)
    p1, ev1, rows1 = lg_data(0.24)
    sum0 = _violation_sum(ev0, rows0, "k3")
    sum1 = _violation_sum(ev1, rows1, "k3")
    ok = abs(sum0 - 1.68) <= 0.02 and abs(sum1 - 0.833) <= 0.02
    _report(
        "01 k3_interval_sums",
        ok,
        f"dg=0: {sum0:.4f} (want 1.68+-0.02); dg=0.24: {sum1:.4f} (want 0.833+-0.02)",
    )
    assert abs(sum0 - 1.68) <= 0.02
    assert abs(sum1 - 0.833) <= 0.02


# ---------------------------------------------------------------------------
# 2. K3' violation-interval regression
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_02_k3prime_interval_sums(lg_data):
    p0, ev0, rows0 = lg_data(0.0)
    p1, ev1, rows1 = lg_data(0.24)
    sum0 = _violation_sum(ev0, rows0, "k3_prime")
    sum1 = _violation_sum(ev1, rows1, "k3_prime")
    ok = abs(sum0 - 3.67) <= 0.02 and abs(sum1 - 2.17) <= 0.02
    _report(
        "02 k3prime_interval_sums",
        ok,
        f"dg=0: {sum0:.4f} (want 3.67+-0.02); dg=0.24: {sum1:.4f} (want 2.17+-0.02)",
    )
    assert abs(sum0 - 3.67) <= 0.02
    assert abs(sum1 - 2.17) <= 0.02


# ---------------------------------------------------------------------------
# 3. Coherence time-average regression
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_03_coherence_averages():
    avg0 = time_average(coherence_series(_params(0.0), GRID_8))
    avg1 = time_average(coherence_series(_params(0.24), GRID_8))
    ok = abs(avg0 - 2.016) <= 0.01 and abs(avg1 - 2.053) <= 0.01
    _report(
        "03 coherence_averages",
        ok,
        f"dg=0: {avg0:.4f} (want 2.016+-0.01); dg=0.24: {avg1:.4f} (want 2.053+-0.01)",
    )
    assert abs(avg0 - 2.016) <= 0.01
    assert abs(avg1 - 2.053) <= 0.01


# ---------------------------------------------------------------------------
# 4. Zero-detuning special-solution equivalence
# ---------------------------------------------------------------------------

def test_criterion_04_special_solution_equivalence():
    p = _params(0.0)
    sol = ClosedFormSolution(p, InitialState.ground())
    dev = max(
        abs(sol.b(t) - b_special_zero_detuning(p, t))
        for t in np.linspace(0.0, 8.0, 200)
    )
    ok = dev <= 1e-12
    _report("04 special_solution_equivalence", ok, f"max dev {dev:.2e} (want <=1e-12)")
    assert dev <= 1e-12


# ---------------------------------------------------------------------------
# 5. Oracle equivalence for the general solution
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_05_oracle_equivalence():
    rng = np.random.default_rng(20240816)
    detunings = (0.12, 0.24, 0.37, 0.5, 0.08)
    grid = [0.75, 1.5, 2.25, 3.0]
    sweeps = (200, 400, 800)
    worst_final = 0.0
    all_monotone = True
    for trial in range(10):
        support = sorted(rng.choice(np.arange(-5, 6), size=6, replace=False))
        init = random_initial_state(rng, [int(n) for n in support])
        p = ModelParams(
            delta_g=detunings[trial % len(detunings)], delta=1.0, w=0.4,
            n_max=800, k_max=8,
        )
        rows = compare_to_analytic(p, init, grid, n_max_values=sweeps)
        devs = [max(r.max_b_dev, r.max_c_dev) for r in rows]
        worst_final = max(worst_final, devs[-1])
        all_monotone = all_monotone and all(b < a for a, b in zip(devs, devs[1:]))
    ok = worst_final <= 1e-3 and all_monotone
    _report(
        "05 oracle_equivalence",
        ok,
        f"worst dev at n_max=800: {worst_final:.2e} (want <=1e-3); "
        f"monotone over {sweeps}: {all_monotone}",
    )
    assert worst_final <= 1e-3
    assert all_monotone


# ---------------------------------------------------------------------------
# 6. Detuning-transformation invariance
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_06_detuning_invariance():
    # K3/K3' at n_max=24000 and the entropy at n_max=60000: truncation-edge
    # leakage scales as 1/n_max^2 (measured 2.2e-7 / 1.8e-6 at 2000), so
    # these sit a couple-fold inside the 1e-8 tolerance
    taus = np.linspace(0.0, 8.0, 50)
    p_lg = ModelParams(delta_g=0.2, delta=1.0, w=0.4, n_max=24000, k_max=16)
    p_coh = ModelParams(delta_g=0.2, delta=1.0, w=0.4, n_max=60000, k_max=16)
    ev = LeggettGargEvaluator(p_lg)
    base = [ev.correlators(t) for t in taus]
    sol = ClosedFormSolution(p_coh, InitialState.ground())
    base_coh = [rel_entropy_coherence(sol.state(t)) for t in taus]
    dev = 0.0
    for sign in (1, -1):
        for n in range(-2, 3):
            if sign == 1 and n == 0:
                continue
            evt = LeggettGargEvaluator(transform_detuning(p_lg, sign, n))
            solt = ClosedFormSolution(
                transform_detuning(p_coh, sign, n), InitialState.ground()
            )
            for i, t in enumerate(taus):
                r = evt.correlators(t)
                dev = max(dev, abs(r.k3 - base[i].k3))
                dev = max(dev, abs(r.k3_prime - base[i].k3_prime))
                dev = max(dev, abs(rel_entropy_coherence(solt.state(t)) - base_coh[i]))
    ok = dev <= 1e-8
    _report("06a invariance_under_detuning_maps", ok, f"max dev {dev:.2e} (want <=1e-8)")
    assert dev <= 1e-8


@pytest.mark.slow
def test_criterion_06_sweep_symmetry():
    # interval sums over [0, 4] as functions of detuning: period 1 in
    # delta_g and reflection-symmetric about delta_g = 1/2.  The truncation
    # is steep because a near-tangential crossing of K3 = 1 around T ~ 0.5
    # amplifies the 1/n_max^2 value leakage into the crossing positions
    # (measured pair deviation: 2.5e-6 at n_max=6000).
    grid = np.linspace(0.0, 4.0, 801)
    detunings = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    sums = {}
    averages = {}
    for dg in detunings:
        p = ModelParams(delta_g=dg, delta=1.0, w=0.4, n_max=13000, k_max=8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sums[dg] = lg_interval_summary(p, grid)
        averages[dg] = time_average(coherence_series(p, grid))
    dev = 0.0
    pairs = []
    for dg in (0.0, 0.25, 0.5, 0.75, 1.0):
        pairs.append((dg, dg + 1.0))  # period 1
    for dg in (0.0, 0.25):
        pairs.append((dg, 1.0 - dg))  # reflection about 1/2
        pairs.append((dg + 1.0, 1.0 - dg))
    for a, b in pairs:
        for va, vb in zip(sums[a], sums[b]):
            dev = max(dev, abs(va - vb))
        dev = max(dev, abs(averages[a] - averages[b]))
    # the two violations are not complementary: some time always has neither
    min_quiet = min(s[2] for s in sums.values())
    ok = dev <= 1e-6 and min_quiet > 0.0
    _report(
        "06b sweep_symmetry",
        ok,
        f"max pair dev {dev:.2e} (want <=1e-6); min both-quiet time {min_quiet:.3f}",
    )
    assert dev <= 1e-6
    assert min_quiet > 0.0


# ---------------------------------------------------------------------------
# 7. Mutual exclusion of the two violations
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_07_mutual_exclusion(lg_data):
    worst_both = 0
    worst_sum = 0.0
    for dg in (0.0, 0.12, 0.24, 0.5):
        _, _, rows = lg_data(dg)
        worst_both += sum(1 for r in rows if r.k3 > 1.0 and r.k3_prime > 1.0)
        worst_sum = max(worst_sum, max(abs(r.k3 + r.k3_prime) for r in rows))
    ok = worst_both == 0 and worst_sum <= 2.0
    _report(
        "07 mutual_exclusion",
        ok,
        f"simultaneous violations: {worst_both}; max |K3+K3'| = {worst_sum:.4f} (want <=2)",
    )
    assert worst_both == 0
    assert worst_sum <= 2.0


# ---------------------------------------------------------------------------
# 8. Kick structure
# ---------------------------------------------------------------------------

def test_criterion_08_kick_structure():
    p = _params(0.0)
    sol = ClosedFormSolution(p, InitialState.ground())
    h = 1e-6
    # two-sided limits of every amplitude, slope extrapolated away
    dev = 0.0
    for k in (1.0, 2.0, 3.0):
        d1b = sol.b(k + h) - sol.b(k - h)
        d2b = sol.b(k + 2 * h) - sol.b(k - 2 * h)
        dev = max(dev, abs(2.0 * d1b - d2b))
        d1c = sol.c_all(k + h) - sol.c_all(k - h)
        d2c = sol.c_all(k + 2 * h) - sol.c_all(k - 2 * h)
        dev = max(dev, float(np.max(np.abs(2.0 * d1c - d2c))))
    prob = lambda t: abs(sol.b(t)) ** 2
    slope_jump = abs(
        (prob(1 + h) - prob(1.0)) / h - (prob(1.0) - prob(1 - h)) / h
    )
    ok = dev <= 1e-8 and slope_jump > 1e-3
    _report(
        "08 kick_structure",
        ok,
        f"max limit gap {dev:.2e} (want <=1e-8); |b|^2 slope jump {slope_jump:.4f} (want >1e-3)",
    )
    assert dev <= 1e-8
    assert slope_jump > 1e-3


# ---------------------------------------------------------------------------
# 9. First-window law and the Lorentzian limit
# ---------------------------------------------------------------------------

def test_criterion_09_first_window_and_lorentzian():
    p = _params(0.0)
    d = derive_params(p)
    sol = ClosedFormSolution(p, InitialState.ground())
    dev = max(
        abs(abs(sol.b(t)) ** 2 - math.exp(-d.alpha * d.gamma * t))
        for t in np.linspace(0.0, 1.0, 101)
    )

    def l1_distance(delta, n_max):
        pp = ModelParams(delta_g=0.0, delta=delta, w=0.4, n_max=n_max, k_max=8)
        occ = np.abs(ClosedFormSolution(pp, InitialState.ground()).c_all(0.98)) ** 2
        prof = np.array(
            [lorentzian_profile(pp, int(n)) for n in range(-n_max, n_max + 1)]
        )
        return float(np.sum(np.abs(occ - prof)) / np.sum(occ))

    coarse = l1_distance(1.0, 1000)
    fine = l1_distance(0.1, 3000)
    ok = dev <= 1e-12 and fine < coarse
    _report(
        "09 first_window_and_lorentzian",
        ok,
        f"decay-law dev {dev:.2e} (want <=1e-12); L1 at spacing 0.1: {fine:.4f} "
        f"< at spacing 1: {coarse:.4f}",
    )
    assert dev <= 1e-12
    assert fine < coarse


# ---------------------------------------------------------------------------
# 10. Truncated normalization and its improvement
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_10_normalization():
    probe = np.concatenate(
        [np.linspace(0.05, 7.95, 33), np.array([1.02, 2.02, 3.02, 5.02])]
    )

    def max_deficit(n_max):
        p = ModelParams(delta_g=0.0, delta=1.0, w=0.4, n_max=n_max, k_max=8)
        sol = ClosedFormSolution(p, InitialState.ground())
        return max(abs(1.0 - sol.state(t).probability_sum()) for t in probe)

    d1000 = max_deficit(1000)
    d2000 = max_deficit(2000)
    improvement = d1000 / d2000
    ok = d1000 <= 5e-3 and improvement >= 1.8
    _report(
        "10 normalization",
        ok,
        f"deficit at 1000: {d1000:.2e} (want <=5e-3); improvement x{improvement:.2f} "
        f"(want >=1.8)",
    )
    assert d1000 <= 5e-3
    assert improvement >= 1.8
