"""Command-line front end: CSV time series, summaries, and validation runs.

Four subcommands:
  evolve     survival amplitude and level occupation vs rescaled time
  lg         Leggett-Garg correlators K3/K3' plus violation-interval summaries
  coherence  relative entropy of coherence plus its time average
  validate   cross-checks (oracle, reductions, continuity, invariance)

Every CSV is self-describing: '#'-prefixed key=value provenance lines, then
a column-name row, then data rows.  Floats are printed with 17 significant
digits; identical run configurations produce byte-identical files (no
timestamps, fixed reduction order).

Exit codes: 0 success, 2 usage error, 3 precondition violation,
4 validation-suite failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .extended import b_general_mp, c_general_mp
from .model import (
    InitialState,
    ModelParams,
    StateVector,
    norm_tolerance,
    survival_probability,
)
from .observables import (
    LeggettGargEvaluator,
    TimeSeries,
    coherence_series,
    interval_sum,
    lg_curve,
    lg_interval_summary,
    rel_entropy_coherence,
    time_average,
    transform_detuning,
)
from .oracle import IntegratorConfig, compare_to_analytic
from .solution import (
    ClosedFormSolution,
    b_special_zero_detuning,
    first_window_b,
)

INIT_FILE_NORM_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """One fully-specified CLI run; everything needed to reproduce it."""

    subcommand: str
    delta_g: float
    delta: float
    w: float
    n_max: int
    k_max: int
    t_max: float
    t_steps: int
    init_spec: str
    out: str | None
    precision: str
    threads: int
    sweep: str | None = None
    levels_at: str | None = None

    def params(self) -> ModelParams:
        return ModelParams(
            delta_g=self.delta_g,
            delta=self.delta,
            w=self.w,
            n_max=self.n_max,
            k_max=self.k_max,
        )

    def grid(self) -> np.ndarray:
        if self.t_max <= 0:
            raise ValueError(f"--t-max must be positive, got {self.t_max}")
        if self.t_steps < 1:
            raise ValueError(f"--t-steps must be >= 1, got {self.t_steps}")
        return np.linspace(0.0, self.t_max, self.t_steps + 1)

    def provenance(self) -> dict:
        # threads is deliberately absent: it schedules the work without
        # touching a single emitted number
        prov = {
            "tool": f"bixon-jortner {__version__}",
            "subcommand": self.subcommand,
            "delta_g": _fmt(self.delta_g),
            "delta": _fmt(self.delta),
            "w": _fmt(self.w),
            "n_max": self.n_max,
            "k_max": self.k_max,
            "t_max": _fmt(self.t_max),
            "t_steps": self.t_steps,
            "init": self.init_spec,
            "precision": self.precision,
        }
        if self.sweep:
            prov["sweep_delta_g"] = self.sweep
        if self.levels_at:
            prov["levels_at"] = self.levels_at
        return prov


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path: str, provenance: dict, columns: list[str], rows) -> None:
    """'#' key=value provenance lines, column row, data rows; UTF-8, LF."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in provenance.items():
            f.write(f"# {key}={value}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def parse_init(spec: str) -> InitialState:
    """Initial-state flag: ground | superposition | inline:... | file:PATH.

    inline syntax: semicolon-separated complex assignments, e.g.
    "inline:b0=0.6;c[0]=0.8j".  Files: '#'-comment header carrying b0_re /
    b0_im, a column row "n,re,im", then one row per occupied level;
    normalization is enforced at load to 1e-9, then renormalized exactly.
    """
    if spec == "ground":
        return InitialState.ground()
    if spec == "superposition":
        amp = 1.0 / math.sqrt(2.0)
        return InitialState.from_mapping(amp, {0: amp})
    if spec.startswith("inline:"):
        return _parse_inline_init(spec[len("inline:"):])
    if spec.startswith("file:"):
        return load_init_file(spec[len("file:"):])
    raise ValueError(
        f"unknown --init spec {spec!r}; expected ground, superposition, "
        "inline:..., or file:PATH"
    )


def _parse_inline_init(body: str) -> InitialState:
    b0 = 0.0 + 0.0j
    c0: dict[int, complex] = {}
    for item in body.split(";"):
        item = item.strip()
        if not item:
            continue
        key, _, value = item.partition("=")
        key = key.strip()
        try:
            amp = complex(value.strip())
        except ValueError as exc:
            raise ValueError(f"bad complex amplitude in --init item {item!r}") from exc
        if key == "b0":
            b0 = amp
        elif key.startswith("c[") and key.endswith("]"):
            c0[int(key[2:-1])] = amp
        else:
            raise ValueError(f"bad --init item {item!r}; use b0=... or c[n]=...")
    return _normalized_init(b0, c0)


def load_init_file(path: str) -> InitialState:
    b0_re = b0_im = 0.0
    c0: dict[int, complex] = {}
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                key = key.strip()
                if key == "b0_re":
                    b0_re = float(value)
                elif key == "b0_im":
                    b0_im = float(value)
                continue
            if line.replace(" ", "") == "n,re,im":
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValueError(f"bad initial-state row {line!r}; expected n,re,im")
            c0[int(parts[0])] = complex(float(parts[1]), float(parts[2]))
    return _normalized_init(complex(b0_re, b0_im), c0)


def _normalized_init(b0: complex, c0: dict[int, complex]) -> InitialState:
    total = math.fsum([abs(b0) ** 2] + [abs(a) ** 2 for a in c0.values()])
    if abs(total - 1.0) > INIT_FILE_NORM_TOL:
        raise ValueError(
            f"initial state norm {total!r} is off by more than {INIT_FILE_NORM_TOL}"
        )
    scale = 1.0 / math.sqrt(total)
    return InitialState.from_mapping(b0 * scale, {n: a * scale for n, a in c0.items()})


def _map_grid(fn, values, threads: int) -> list:
    """Evaluate fn over values, fanning out to a bounded worker pool.

    Results are assembled in input order, so the output is identical for
    any thread count.
    """
    if threads <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, values))


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def cmd_evolve(cfg: RunConfig) -> int:
    params = cfg.params()
    init = parse_init(cfg.init_spec)
    grid = cfg.grid()
    if not cfg.t_max < params.k_max + 1:
        raise ValueError(
            f"k_max={params.k_max} only covers T < {params.k_max + 1}; "
            f"--t-max {cfg.t_max} needs a larger --k-max"
        )

    if cfg.precision == "extended":
        levels = np.arange(-params.n_max, params.n_max + 1)

        def row(t: float):
            b = b_general_mp(params, init, t)
            pc = math.fsum(
                abs(c_general_mp(params, init, int(n), t)) ** 2 for n in levels
            )
            return (t, b.real, b.imag, abs(b) ** 2, pc)

    else:
        sol = ClosedFormSolution(params, init)

        def row(t: float):
            state = sol.state(t)
            pc = state.probability_sum() - abs(state.b) ** 2
            return (t, state.b.real, state.b.imag, survival_probability(state), pc)

    rows = _map_grid(row, grid, cfg.threads)
    write_csv(
        cfg.out,
        cfg.provenance(),
        ["T", "re_b", "im_b", "prob_b", "prob_c_total"],
        rows,
    )
    print(f"wrote {len(rows)} rows to {cfg.out}")

    if cfg.levels_at:
        sol = ClosedFormSolution(params, init)
        dump_path = cfg.out + ".levels.csv"
        dump_rows = []
        for t_str in cfg.levels_at.split(","):
            t = float(t_str)
            state = sol.state(t)
            for n, amp in zip(state.levels, state.c):
                dump_rows.append((t, int(n), abs(amp) ** 2))
        write_csv(
            dump_path, cfg.provenance(), ["T", "n", "prob_c"], dump_rows
        )
        print(f"wrote per-level occupations to {dump_path}")
    return 0


# ---------------------------------------------------------------------------
# lg
# ---------------------------------------------------------------------------

def _parse_sweep(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise ValueError(f"bad sweep spec {spec!r}; expected LO:HI:STEP") from exc
    if step <= 0 or hi < lo:
        raise ValueError(f"bad sweep spec {spec!r}; need LO <= HI and STEP > 0")
    count = int(round((hi - lo) / step))
    return lo + step * np.arange(count + 1)


def cmd_lg(cfg: RunConfig) -> int:
    params = cfg.params()
    grid = cfg.grid()
    if grid[-1] > params.k_max / 2.0:
        raise ValueError(
            f"C31 reaches 2*t_max={2 * cfg.t_max}; raise --k-max to at least "
            f"{math.ceil(2 * cfg.t_max)}"
        )

    if cfg.sweep:
        sweep_values = _parse_sweep(cfg.sweep)
        rows = []
        for dg in sweep_values:
            p = replace(params, delta_g=float(dg))
            above_k3, above_k3p, both_below = lg_interval_summary(p, grid)
            rows.append((float(dg), above_k3, above_k3p, both_below))
        write_csv(
            cfg.out,
            cfg.provenance(),
            ["delta_g", "k3_above_1_time", "k3p_above_1_time", "both_at_most_1_time"],
            rows,
        )
        print(f"wrote {len(rows)} sweep rows to {cfg.out}")
        return 0

    ev = LeggettGargEvaluator(params)
    curve = _map_grid(ev.correlators, grid, cfg.threads)
    write_csv(
        cfg.out,
        cfg.provenance(),
        ["T", "C21", "C31", "C32", "K3", "K3p"],
        [(r.tau, r.c21, r.c31, r.c32, r.k3, r.k3_prime) for r in curve],
    )
    k3 = TimeSeries(grid, np.array([r.k3 for r in curve]), fn=lambda t: ev.correlators(t).k3)
    k3p = TimeSeries(
        grid, np.array([r.k3_prime for r in curve]), fn=lambda t: ev.correlators(t).k3_prime
    )
    above_k3 = interval_sum(k3, 1.0, "above")
    above_k3p = interval_sum(k3p, 1.0, "above")
    both_below = float(grid[-1] - grid[0]) - above_k3 - above_k3p
    print(f"wrote {len(curve)} rows to {cfg.out}")
    print(f"k3_above_1_time={_fmt(above_k3)}")
    print(f"k3p_above_1_time={_fmt(above_k3p)}")
    print(f"both_at_most_1_time={_fmt(both_below)}")
    return 0


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------

def cmd_coherence(cfg: RunConfig) -> int:
    params = cfg.params()
    grid = cfg.grid()
    if not cfg.t_max < params.k_max + 1:
        raise ValueError(
            f"k_max={params.k_max} only covers T < {params.k_max + 1}; "
            f"--t-max {cfg.t_max} needs a larger --k-max"
        )

    if cfg.sweep:
        if cfg.precision == "extended":
            raise ValueError("sweeps run in double precision only")
        sweep_values = _parse_sweep(cfg.sweep)
        rows = []
        for dg in sweep_values:
            p = replace(params, delta_g=float(dg))
            series = coherence_series(p, grid)
            rows.append((float(dg), time_average(series)))
        write_csv(cfg.out, cfg.provenance(), ["delta_g", "avg_c_rel_ent"], rows)
        print(f"wrote {len(rows)} sweep rows to {cfg.out}")
        return 0

    if cfg.precision == "extended":
        init = InitialState.ground()
        levels = np.arange(-params.n_max, params.n_max + 1)

        def value(t: float) -> float:
            probs = [abs(b_general_mp(params, init, t)) ** 2]
            probs.extend(
                abs(c_general_mp(params, init, int(n), t)) ** 2 for n in levels
            )
            return -math.fsum(p * math.log(p) for p in probs if p > 0.0)

        values = _map_grid(value, grid, cfg.threads)
        series = TimeSeries(grid, np.array(values))
    else:
        sol = ClosedFormSolution(params, InitialState.ground())
        values = _map_grid(
            lambda t: rel_entropy_coherence(sol.state(t)), grid, cfg.threads
        )
        series = TimeSeries(grid, np.array(values))

    write_csv(
        cfg.out,
        cfg.provenance(),
        ["T", "C_rel_ent"],
        list(zip(series.grid, series.values)),
    )
    print(f"wrote {series.grid.size} rows to {cfg.out}")
    print(f"avg_c_rel_ent={_fmt(time_average(series))}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

@dataclass
class CheckRow:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.tolerance


def run_validation(
    params: ModelParams,
    *,
    full: bool = False,
    flip_laguerre_sign: bool = False,
    seed: int = 20240816,
) -> list[CheckRow]:
    """The battery behind `validate`; returns one row per check."""
    rows: list[CheckRow] = []
    rng = np.random.default_rng(seed)

    # 1. reduced zero-detuning path vs the general formula
    p0 = replace(params, delta_g=0.0)
    sol0 = ClosedFormSolution(
        p0, InitialState.ground(), laguerre_sign_flip=flip_laguerre_sign
    )
    ts = np.linspace(0.0, min(8.0, params.k_max + 0.999), 200)
    dev = max(abs(sol0.b(t) - b_special_zero_detuning(p0, t)) for t in ts)
    rows.append(CheckRow("special_solution_equivalence", dev, 1e-12))

    # 2. first-window law |b|^2 = exp(-alpha*gamma*T)
    from .model import derive_params

    d = derive_params(p0)
    dev = max(
        abs(abs(first_window_b(p0, t)) ** 2 - math.exp(-d.alpha * d.gamma * t))
        for t in np.linspace(0.0, 1.0, 40)
    )
    rows.append(CheckRow("first_window_decay_law", dev, 1e-12))

    # 3. closed-form normalization on the truncated basis
    sol = ClosedFormSolution(
        params, InitialState.ground(), laguerre_sign_flip=flip_laguerre_sign
    )
    t_probe = [0.5, 2.5] if not full else [0.5, 2.5, 5.5, 7.5]
    t_probe = [t for t in t_probe if t < params.k_max + 1]
    dev = max(abs(1.0 - sol.state(t).probability_sum()) for t in t_probe)
    rows.append(CheckRow("normalization_deficit", dev, norm_tolerance(params)))

    # 4. value continuity across the first kicks: the two one-sided limits
    # must agree.  The raw difference f(k+h) - f(k-h) carries the smooth
    # slope (~|f'| 2h), so extrapolate it away: 2 D(h) - D(2h) = jump + O(h^2).
    h = 1e-6
    dev = 0.0
    for k in (1, 2):
        if k + 2 * h >= params.k_max + 1:
            continue
        fns = [sol.b] + [lambda t, n=n: sol.c(n, t) for n in (-3, 0, 5)]
        for f in fns:
            d1 = f(k + h) - f(k - h)
            d2 = f(k + 2 * h) - f(k - 2 * h)
            dev = max(dev, abs(2.0 * d1 - d2))
    rows.append(CheckRow("kick_continuity", dev, 1e-8))

    # 5. oracle comparison on a random normalized initial state
    raw = rng.normal(size=8) + 1j * rng.normal(size=8)
    raw /= np.linalg.norm(raw)
    support = [-5, -3, -1, 0, 2, 3, 4]
    init = InitialState.from_mapping(
        raw[0], {n: raw[i + 1] for i, n in enumerate(support)}
    )
    p_orc = replace(params, delta_g=params.delta_g if params.delta_g else 0.24)
    if full:
        sweep = (200, 400, 800)
        t_grid = [0.5, 1.5, 2.25, 3.0]
        tol = 1e-3
    else:
        sweep = (100, 200)
        t_grid = [0.5, 1.25]
        tol = 4e-3
    if max(sweep) > p_orc.n_max:
        p_orc = replace(p_orc, n_max=max(sweep))
    analytic_flip = ClosedFormSolution(
        p_orc, init, laguerre_sign_flip=flip_laguerre_sign
    )
    from .oracle import integrate_path

    devs = []
    for nm in sweep:
        states = integrate_path(p_orc, init, t_grid, IntegratorConfig(n_max=nm))
        b_dev = max(
            abs(analytic_flip.b(t) - s.b) for t, s in zip(t_grid, states)
        )
        lv = np.arange(-nm, nm + 1)
        c_dev = max(
            float(np.max(np.abs(analytic_flip.c_levels(lv, t) - s.c)))
            for t, s in zip(t_grid, states)
        )
        devs.append(max(b_dev, c_dev))
    rows.append(CheckRow("oracle_deviation_finest", devs[-1], tol))
    monotone = all(b <= a * 1.05 for a, b in zip(devs, devs[1:]))
    rows.append(
        CheckRow("oracle_convergence_monotone", 0.0 if monotone else 1.0, 0.5)
    )

    # 6. detuning-transformation invariance of K3 and the coherence
    inv_p = replace(params, k_max=max(params.k_max, 6))
    ev0 = LeggettGargEvaluator(inv_p)
    taus = [0.4, 1.3, 2.6]
    base_k3 = [ev0.correlators(t).k3 for t in taus]
    base_coh = [
        rel_entropy_coherence(ClosedFormSolution(inv_p, InitialState.ground()).state(t))
        for t in taus
    ]
    dev_k3 = dev_coh = 0.0
    for sign, shift in ((1, 1), (-1, 1), (-1, 0)):
        tp = transform_detuning(inv_p, sign, shift)
        evt = LeggettGargEvaluator(tp)
        solt = ClosedFormSolution(tp, InitialState.ground())
        for i, t in enumerate(taus):
            dev_k3 = max(dev_k3, abs(evt.correlators(t).k3 - base_k3[i]))
            dev_coh = max(
                dev_coh, abs(rel_entropy_coherence(solt.state(t)) - base_coh[i])
            )
    # edge-of-truncation leakage shrinks like 1/n_max^2; the floors below are
    # calibrated so the defaults pass at n_max=1000 with real margin
    rows.append(
        CheckRow("detuning_invariance_k3", dev_k3, max(1e-8, 4.0 / params.n_max**2))
    )
    rows.append(
        CheckRow(
            "detuning_invariance_coherence",
            dev_coh,
            max(1e-8, 60.0 / params.n_max**2),
        )
    )
    return rows


def cmd_validate(cfg: RunConfig, *, full: bool, flip_laguerre_sign: bool) -> int:
    params = cfg.params()
    rows = run_validation(params, full=full, flip_laguerre_sign=flip_laguerre_sign)
    width = max(len(r.name) for r in rows)
    failures = 0
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        if not r.passed:
            failures += 1
        print(f"{status}  {r.name:<{width}}  measured={r.measured:.3e}  tol={r.tolerance:.3e}")
    if cfg.out:
        write_csv(
            cfg.out,
            cfg.provenance(),
            ["check", "measured", "tolerance", "status"],
            [
                (r.name, r.measured, r.tolerance, "pass" if r.passed else "fail")
                for r in rows
            ],
        )
        print(f"wrote report to {cfg.out}")
    if failures:
        print(f"{failures} check(s) failed")
        return 4
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bixon-jortner",
        description="Quasi-continuum level-coupling dynamics and observables",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser, *, needs_out: bool) -> None:
        p.add_argument("--delta-g", type=float, default=0.0, help="detuning of the single level")
        p.add_argument("--delta", type=float, default=1.0, help="quasi-continuum spacing (> 0)")
        p.add_argument("--w", type=float, default=0.4, help="uniform coupling strength")
        p.add_argument("--n-max", type=int, default=1000, help="basis truncation (levels +-n_max)")
        p.add_argument("--k-max", type=int, default=None,
                       help="kick-series cutoff (default: enough for --t-max)")
        p.add_argument("--t-max", type=float, default=8.0, help="end of the rescaled-time grid")
        p.add_argument("--t-steps", type=int, default=1600, help="grid intervals on [0, t-max]")
        p.add_argument("--init", default="ground",
                       help="ground | superposition | inline:b0=..;c[n]=.. | file:PATH")
        p.add_argument("--out", required=needs_out, default=None, help="output CSV path")
        p.add_argument("--precision", choices=("double", "extended"), default="double",
                       help="extended runs the slow arbitrary-precision path")
        p.add_argument("--threads", type=int, default=1, help="worker threads for grid points")

    p_evolve = sub.add_parser("evolve", help="amplitudes and occupations vs time")
    add_common(p_evolve, needs_out=True)
    p_evolve.add_argument("--levels-at", default=None,
                          help="comma-separated T values for a per-level |c_n|^2 dump")

    p_lg = sub.add_parser("lg", help="Leggett-Garg correlators and violation intervals")
    add_common(p_lg, needs_out=True)
    p_lg.add_argument("--sweep-delta-g", default=None, metavar="LO:HI:STEP",
                      help="emit interval sums vs detuning instead of a time series")

    p_coh = sub.add_parser("coherence", help="relative entropy of coherence")
    add_common(p_coh, needs_out=True)
    p_coh.add_argument("--sweep-delta-g", default=None, metavar="LO:HI:STEP",
                       help="emit the time average vs detuning instead of a series")

    p_val = sub.add_parser("validate", help="run the cross-check battery")
    add_common(p_val, needs_out=False)
    p_val.add_argument("--full", action="store_true",
                       help="run the long oracle sweep (200/400/800 levels)")
    p_val.add_argument("--flip-laguerre-sign", action="store_true",
                       help="negative control: force the wrong sign convention")

    return parser


def _default_k_max(sub: str, t_max: float, explicit: int | None) -> int:
    if explicit is not None:
        return explicit
    if sub == "lg":
        return max(16, math.ceil(2.0 * t_max))
    return max(8, math.ceil(t_max))


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        subcommand=args.subcommand,
        delta_g=args.delta_g,
        delta=args.delta,
        w=args.w,
        n_max=args.n_max,
        k_max=_default_k_max(args.subcommand, args.t_max, args.k_max),
        t_max=args.t_max,
        t_steps=args.t_steps,
        init_spec=args.init,
        out=args.out,
        precision=args.precision,
        threads=max(1, args.threads),
        sweep=getattr(args, "sweep_delta_g", None),
        levels_at=getattr(args, "levels_at", None),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "lg" and args.precision == "extended":
        # the collapsed-branch propagation has no arbitrary-precision path
        parser.error("lg supports --precision double only (use evolve or coherence)")
    cfg = config_from_args(args)
    try:
        if args.subcommand == "evolve":
            return cmd_evolve(cfg)
        if args.subcommand == "lg":
            return cmd_lg(cfg)
        if args.subcommand == "coherence":
            return cmd_coherence(cfg)
        if args.subcommand == "validate":
            return cmd_validate(
                cfg, full=args.full, flip_laguerre_sign=args.flip_laguerre_sign
            )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError(f"unhandled subcommand {args.subcommand!r}")


if __name__ == "__main__":
    sys.exit(main())
