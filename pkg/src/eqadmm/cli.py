"""Command-line front end.

Exit codes: 0 success (including solves that hit the iteration cap, which
are reported, not failed), 1 property violation in ``verify``, 2 I/O or
argument error, 3 degenerate input.
"""

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import mmio
from .consensus import (
    ConsensusProblem,
    convergence_rate_bound,
    equilibrate_gram_inverse,
    optimal_scalar_rho,
    solve_consensus,
)
from .equilibration import (
    DivergenceError,
    check_kappa_sqrt_n,
    check_psi_optimality,
    is_near_singular,
    random_diagonals,
    ruiz,
    sinkhorn_knopp,
    verify_scaling_bounds,
)
from .graph import SolverConfig, log_grid, plan_scaling, product_grid, solve_graph_form, sweep, worker_count
from .metrics import DegenerateInputError, InvalidInputError, condition_number, row_col_ratios
from .problems import gen_gaussian, gen_lasso, gen_lp, load_problem

EXIT_OK, EXIT_VIOLATION, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2, 3

REPORT_COLUMNS = ["method", "m", "n", "p", "eps", "iterations", "r1", "r2",
                  "kappa_before", "kappa_after", "converged"]
TRACE_COLUMNS = ["iteration", "objective", "r_primal", "r_dual", "eps_primal", "eps_dual",
                 "r_primal_unscaled", "r_dual_unscaled", "step"]
SWEEP_COLUMNS = ["scaling", "step", "iterations", "status", "final_objective", "is_min",
                 "trial", "seed", "gamma", "alpha_beta", "beta_over_alpha"]
SWEEP_MEAN_COLUMNS = ["scaling", "step", "iterations", "failures", "trials", "final_objective", "is_min"]
COMPARISON_COLUMNS = ["seed", "m", "n", "kappa_A", "rho_star",
                      "iters_one", "iters_rho", "iters_equil",
                      "status_one", "status_rho", "status_equil",
                      "bound_one", "bound_rho", "bound_equil", "ordered"]
VERIFY_COLUMNS = ["trial", "dim", "check", "holds", "worst_slack", "samples"]

EPILOG = f"""
outputs (all CSV files have a fixed header row):
  equilibrate        d1.txt, d2.txt, report.csv: {','.join(REPORT_COLUMNS)}
  solve              trace.csv: {','.join(TRACE_COLUMNS)}; x.txt, y.txt
  sweep              sweep.csv (one row per cell and trial): {','.join(SWEEP_COLUMNS)}
                     sweep_mean.csv (mean over trials, failures count as
                     max-iter): {','.join(SWEEP_MEAN_COLUMNS)}
  compare-consensus  comparison.csv: {','.join(COMPARISON_COLUMNS)}
  verify             verify.csv: {','.join(VERIFY_COLUMNS)}; counterexample_*.mtx on violation

sweep grid: --grid LO:HI:STEPS,LO:HI:STEPS gives log-spaced values of
||DAE|| (= alpha*beta*gamma) and of beta/alpha in units of --step-unit.

exit codes: 0 ok, 1 property violation, 2 I/O or bad arguments, 3 degenerate input
"""


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    gen: Optional[str] = None
    m: int = 750
    n: int = 250
    seed: int = 0
    p: float = 2.0
    eps: float = 1e-6
    tol: float = 1e-4
    max_iter: Optional[int] = None
    grid: str = "0.01:100:9,0.01:100:9"
    trials: int = 1
    target_norm: float = 1.0
    rho0: float = 1.0
    adaptive: bool = False
    equilibrate: bool = True
    output: str = "."
    method: str = "ruiz"
    col_decades: float = 0.0
    dim: str = "5:20"
    step_unit: str = "gamma"

    @classmethod
    def from_args(cls, ns) -> "RunConfig":
        cfg = cls(command=ns.command, input=ns.input, gen=ns.gen, m=ns.m, n=ns.n, seed=ns.seed,
                  p=ns.p, eps=ns.eps, tol=ns.tol, max_iter=ns.max_iter, grid=ns.grid,
                  trials=ns.trials, target_norm=ns.target_norm, rho0=ns.rho0,
                  adaptive=ns.adaptive == "on", equilibrate=not ns.no_equilibration,
                  output=ns.output, method=ns.method, col_decades=ns.col_decades, dim=ns.dim,
                  step_unit=ns.step_unit)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("eps", "target_norm", "rho0"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.tol < 0:
            raise UsageError("--tol must be nonnegative")
        if self.p < 1:
            raise UsageError("-p must be at least 1")
        if self.m < 1 or self.n < 1 or self.trials < 1:
            raise UsageError("-m, -n and --trials must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise UsageError("--max-iter must be positive")
        if self.col_decades < 0:
            raise UsageError("--col-decades must be nonnegative")

    def iteration_cap(self, default):
        return default if self.max_iter is None else self.max_iter


def parse_grid(spec: str) -> Tuple[np.ndarray, np.ndarray]:
    try:
        axes = []
        for part in spec.split(","):
            lo, hi, steps = part.split(":")
            axes.append(log_grid(float(lo), float(hi), int(steps)))
        scal, step = axes
    except (ValueError, InvalidInputError) as exc:
        raise UsageError(f"bad --grid {spec!r}: expected LO:HI:STEPS,LO:HI:STEPS") from exc
    return scal, step


def parse_dims(spec: str) -> List[int]:
    try:
        if ":" in spec:
            lo, hi = (int(v) for v in spec.split(":"))
        else:
            lo = hi = int(spec)
    except ValueError as exc:
        raise UsageError(f"bad --dim {spec!r}") from exc
    if lo < 1 or hi < lo:
        raise UsageError(f"bad --dim {spec!r}")
    return list(range(lo, hi + 1))


# --- helpers ---

def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _prepare_output(path):
    os.makedirs(path, exist_ok=True)
    return path


def _load_matrix(cfg: RunConfig) -> np.ndarray:
    if cfg.input:
        if os.path.isdir(cfg.input):
            return load_problem(cfg.input).A
        return mmio.read_matrix(cfg.input)
    gen = cfg.gen or "gaussian"
    if gen == "gaussian":
        return gen_gaussian(cfg.m, cfg.n, cfg.seed, cfg.col_decades)
    return _make_problem(cfg, cfg.seed).A


def _make_problem(cfg: RunConfig, seed):
    if cfg.input:
        return load_problem(cfg.input)
    gen = cfg.gen or "lasso"
    if gen == "lasso":
        return gen_lasso(cfg.m, cfg.n, seed, col_decades=cfg.col_decades)
    if gen == "lp":
        return gen_lp(cfg.m, cfg.n, seed, col_decades=cfg.col_decades)
    raise UsageError(f"--gen {gen} does not define an optimization problem")


def _plan(cfg: RunConfig, prob):
    """Scaling plan; falls back to no equilibration for zero rows or columns."""
    try:
        return plan_scaling(prob.A, p=cfg.p, target_norm=cfg.target_norm, rho0=cfg.rho0,
                            equilibrate=cfg.equilibrate, eps=cfg.eps)
    except DegenerateInputError as exc:
        print(f"note: {exc}; solving without equilibration", file=sys.stderr)
        return plan_scaling(prob.A, p=cfg.p, target_norm=cfg.target_norm, rho0=cfg.rho0,
                            equilibrate=False)


def _solver_config(cfg: RunConfig, **overrides) -> SolverConfig:
    kw = dict(tol=cfg.tol, max_iter=cfg.iteration_cap(100_000), adaptive=cfg.adaptive)
    kw.update(overrides)
    return SolverConfig(**kw)


def _step_unit(cfg: RunConfig, gamma) -> float:
    return {"one": 1.0, "gamma": gamma, "inv-gamma": 1.0 / gamma}[cfg.step_unit]


def _pool_map(fn, jobs):
    workers = worker_count(len(jobs))
    if workers == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# --- commands ---

def cmd_equilibrate(cfg: RunConfig) -> int:
    A = _load_matrix(cfg)
    algo = ruiz if cfg.method == "ruiz" else sinkhorn_knopp
    scaling, rep = algo(A, p=cfg.p, eps=cfg.eps, max_iter=cfg.iteration_cap(100))
    m, n = A.shape
    row = dict(method=cfg.method, m=m, n=n, p=cfg.p, eps=cfg.eps, iterations=rep.iterations,
               r1=rep.r1 if rep.r1 is not None else 1.0, r2=rep.r2 if rep.r2 is not None else 1.0,
               kappa_before=rep.kappa_before, kappa_after=rep.kappa_after, converged=rep.converged)
    if rep.r1 is None:
        # already equilibrated on entry; report the measured ratios
        row["r1"], row["r2"] = row_col_ratios(A, cfg.p)
    out = _prepare_output(cfg.output)
    mmio.write_vector(os.path.join(out, "d1.txt"), scaling.d1)
    mmio.write_vector(os.path.join(out, "d2.txt"), scaling.d2)
    _write_csv(os.path.join(out, "report.csv"), REPORT_COLUMNS, [row])
    print(f"{cfg.method}: iterations={rep.iterations} r1={row['r1']:.9g} r2={row['r2']:.9g} "
          f"kappa {rep.kappa_before:.6g} -> {rep.kappa_after:.6g} converged={rep.converged}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    prob = _make_problem(cfg, cfg.seed)
    plan = _plan(cfg, prob)
    tr = solve_graph_form(prob, plan, _solver_config(cfg))
    out = _prepare_output(cfg.output)
    rows = [dict(iteration=k + 1, objective=tr.objective[k], r_primal=tr.r_primal[k],
                 r_dual=tr.r_dual[k], eps_primal=tr.eps_primal[k], eps_dual=tr.eps_dual[k],
                 r_primal_unscaled=tr.r_primal_unscaled[k], r_dual_unscaled=tr.r_dual_unscaled[k],
                 step=tr.step_history[k])
            for k in range(tr.iterations)]
    _write_csv(os.path.join(out, "trace.csv"), TRACE_COLUMNS, rows)
    mmio.write_vector(os.path.join(out, "x.txt"), tr.x)
    mmio.write_vector(os.path.join(out, "y.txt"), tr.y)
    print(f"status={tr.status} iterations={tr.iterations} objective={tr.final_objective:.12g} "
          f"gamma={plan.gamma:.6g} adaptations={tr.adaptations} factorizations={tr.refactor_count}")
    return EXIT_OK


def run_sweep(cfg: RunConfig):
    """Per-trial sweep rows and their means; shared by the CLI and scripts."""
    scal_axis, step_axis = parse_grid(cfg.grid)
    if cfg.input and cfg.trials > 1:
        raise UsageError("--trials > 1 needs a generator, not --input")
    scfg = _solver_config(cfg)
    rows = []
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        prob = _make_problem(cfg, seed)
        base = _plan(cfg, prob)
        unit = _step_unit(cfg, base.gamma)
        coords = product_grid(scal_axis, step_axis)
        grid = [(s / base.gamma, t * unit) for s, t in coords]
        cells = sweep(prob, base, grid, scfg)
        for (s, t), c in zip(coords, cells):
            rows.append(dict(scaling=s, step=t, iterations=c.iterations, status=c.status,
                             final_objective=c.final_objective, is_min=c.is_min, trial=trial,
                             seed=seed, gamma=base.gamma, alpha_beta=c.scaling, beta_over_alpha=c.step))
    mean_rows = []
    ncell = len(scal_axis) * len(step_axis)
    for i in range(ncell):
        cell = rows[i::ncell]
        its = [r["iterations"] if r["status"] == "converged" else scfg.max_iter for r in cell]
        mean_rows.append(dict(scaling=cell[0]["scaling"], step=cell[0]["step"],
                              iterations=float(np.mean(its)),
                              failures=sum(r["status"] != "converged" for r in cell),
                              trials=len(cell),
                              final_objective=float(np.mean([r["final_objective"] for r in cell]))))
    best = min(r["iterations"] for r in mean_rows)
    for r in mean_rows:
        r["is_min"] = r["iterations"] == best
    return rows, mean_rows


def cmd_sweep(cfg: RunConfig) -> int:
    rows, mean_rows = run_sweep(cfg)
    out = _prepare_output(cfg.output)
    _write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows)
    _write_csv(os.path.join(out, "sweep_mean.csv"), SWEEP_MEAN_COLUMNS, mean_rows)
    best = [r for r in mean_rows if r["is_min"]]
    print(f"{len(mean_rows)} cells x {cfg.trials} trials; minimum mean iterations "
          f"{best[0]['iterations']:g} at " +
          "; ".join(f"||DAE||={r['scaling']:.4g} step={r['step']:.4g}" for r in best))
    return EXIT_OK


def compare_consensus(prob, tol=1e-4, max_iter=100_000):
    """Consensus ADMM three ways on a lasso instance; returns a result row."""
    if prob.f.kind != "quadratic":
        raise UsageError("compare-consensus needs a least-squares loss (lasso-kind problem)")
    A, b, g = prob.A, prob.f.b, prob.g
    rho = optimal_scalar_rho(A)
    Fs = {"one": np.ones(A.shape[1]), "rho": np.full(A.shape[1], np.sqrt(rho)),
          "equil": equilibrate_gram_inverse(A)}
    row = dict(seed=prob.meta.get("seed", ""), m=A.shape[0], n=A.shape[1],
               kappa_A=condition_number(A), rho_star=rho)
    for name, F in Fs.items():
        tr = solve_consensus(ConsensusProblem(A, b, g, F), tol=tol, max_iter=max_iter)
        row[f"iters_{name}"] = tr.iterations
        row[f"status_{name}"] = tr.status
        row[f"bound_{name}"] = convergence_rate_bound(A, F)
    row["ordered"] = row["iters_one"] >= row["iters_rho"] >= row["iters_equil"]
    return row


def cmd_compare_consensus(cfg: RunConfig) -> int:
    if cfg.input and cfg.trials > 1:
        raise UsageError("--trials > 1 needs a generator, not --input")
    if cfg.gen not in (None, "lasso"):
        raise UsageError("compare-consensus generates lasso instances only")
    rows = []
    for trial in range(cfg.trials):
        prob = _make_problem(cfg, cfg.seed + trial)
        row = compare_consensus(prob, cfg.tol, cfg.iteration_cap(100_000))
        rows.append(row)
        print(f"seed={row['seed']} kappa(A)={row['kappa_A']:.4g} rho*={row['rho_star']:.4g} "
              f"iterations F=1: {row['iters_one']} ({row['status_one']}), "
              f"F=sqrt(rho*): {row['iters_rho']} ({row['status_rho']}), "
              f"F=equilibrated: {row['iters_equil']} ({row['status_equil']}) "
              f"ordered={row['ordered']}")
    out = _prepare_output(cfg.output)
    _write_csv(os.path.join(out, "comparison.csv"), COMPARISON_COLUMNS, rows)
    return EXIT_OK


def _verify_trial(job):
    trial, dim, seed = job
    rng = np.random.default_rng([seed, trial])
    checks, A, P = verify_scaling_bounds(dim, rng)
    return trial, dim, checks, A, P


def cmd_verify(cfg: RunConfig) -> int:
    out = _prepare_output(cfg.output)
    rows = []
    violations = 0
    if cfg.input:
        A = mmio.read_matrix(cfg.input)
        if A.shape[0] != A.shape[1]:
            raise DegenerateInputError("verify needs a square matrix")
        if is_near_singular(A):
            print("skipped: input matrix is numerically singular")
            _write_csv(os.path.join(out, "verify.csv"), VERIFY_COLUMNS, rows)
            return EXIT_OK
        diags = random_diagonals(A.shape[0], 100, np.random.default_rng(cfg.seed))
        results = [(0, A.shape[0], [check_psi_optimality(A, diags), check_kappa_sqrt_n(A, diags)],
                    A, None)]
    else:
        dims = parse_dims(cfg.dim)
        jobs = [(t, dims[t % len(dims)], cfg.seed) for t in range(cfg.trials)]
        results = _pool_map(_verify_trial, jobs)
    skipped = 0
    for trial, dim, checks, A, P in results:
        if not checks:
            skipped += 1
            print(f"trial {trial}: skipped, near-singular instance (dim {dim})")
            continue
        for c in checks:
            rows.append(dict(trial=trial, dim=dim, check=c.name, holds=c.holds,
                             worst_slack=c.worst_slack, samples=c.samples))
            if not c.holds:
                violations += 1
                mmio.write_matrix(os.path.join(out, f"counterexample_{trial}_A.mtx"), A)
                if P is not None:
                    mmio.write_matrix(os.path.join(out, f"counterexample_{trial}_P.mtx"), P)
                print(f"trial {trial}: {c.name} violated (slack {c.worst_slack:.3e})")
    _write_csv(os.path.join(out, "verify.csv"), VERIFY_COLUMNS, rows)
    print(f"{len(results) - skipped} instances checked, {skipped} skipped, {violations} violations")
    return EXIT_VIOLATION if violations else EXIT_OK


COMMANDS = {
    "equilibrate": cmd_equilibrate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "compare-consensus": cmd_compare_consensus,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqadmm", description="Diagonal equilibration and scaled ADMM.",
                                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--input", help="MatrixMarket file or saved problem directory")
    ap.add_argument("--gen", choices=["gaussian", "lasso", "lp"], help="generate the input instead")
    ap.add_argument("-m", type=int, default=750)
    ap.add_argument("-n", type=int, default=250)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-p", type=float, default=2.0, help="norm order for equilibration")
    ap.add_argument("--eps", type=float, default=1e-6, help="equilibration tolerance")
    ap.add_argument("--tol", type=float, default=1e-4, help="relative ADMM stopping tolerance")
    ap.add_argument("--max-iter", type=int, default=None,
                    help="iteration cap (default 100000 for solvers, 100 for equilibrate)")
    ap.add_argument("--grid", default="0.01:100:9,0.01:100:9")
    ap.add_argument("--trials", type=int, default=1)
    ap.add_argument("--target-norm", type=float, default=1.0, help="||DAE|| for solve")
    ap.add_argument("--rho0", type=float, default=1.0, help="initial beta/alpha")
    ap.add_argument("--adaptive", choices=["on", "off"], default="off")
    ap.add_argument("--no-equilibration", action="store_true")
    ap.add_argument("-o", "--output", default=".", help="output directory")
    ap.add_argument("--method", choices=["ruiz", "sinkhorn"], default="ruiz")
    ap.add_argument("--col-decades", type=float, default=0.0,
                    help="scale generated columns by 10**U(-d, d)")
    ap.add_argument("--dim", default="5:20", help="verify: dimension or LO:HI range")
    ap.add_argument("--step-unit", choices=["one", "gamma", "inv-gamma"], default="gamma",
                    help="sweep: unit of the beta/alpha grid axis")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = RunConfig.from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DegenerateInputError, DivergenceError) as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
