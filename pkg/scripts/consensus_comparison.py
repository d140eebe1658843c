"""Consensus ADMM on lasso instances with three diagonal preconditioners:
F = 1, F = sqrt(rho*) and F equilibrating (A^T A)^{-1}.

Prints one line per seed and a summary; writes comparison.csv.

    python3 scripts/consensus_comparison.py --col-decades 2 --trials 10
"""
import argparse
import os

import numpy as np

from eqadmm import cli
from eqadmm.problems import gen_lasso

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=10)
ap.add_argument("--col-decades", type=float, default=2.0)
ap.add_argument("--max-iter", type=int, default=100_000)
ap.add_argument("-m", type=int, default=750)
ap.add_argument("-n", type=int, default=250)
ap.add_argument("-o", "--output", default="results/consensus")
args = ap.parse_args()

rows = []
for seed in range(args.trials):
    prob = gen_lasso(args.m, args.n, seed, col_decades=args.col_decades)
    r = cli.compare_consensus(prob, tol=1e-4, max_iter=args.max_iter)
    rows.append(r)
    print(f"seed {seed}: kappa(A)={r['kappa_A']:.3g}  iterations {r['iters_one']} / {r['iters_rho']} / "
          f"{r['iters_equil']}  rate bounds {r['bound_one']:.3g} / {r['bound_rho']:.3g} / {r['bound_equil']:.3g}")

os.makedirs(args.output, exist_ok=True)
cli._write_csv(os.path.join(args.output, "comparison.csv"), cli.COMPARISON_COLUMNS, rows)
its = np.array([[r["iters_one"], r["iters_rho"], r["iters_equil"]] for r in rows])
print(f"median iterations F=1: {np.median(its[:, 0]):g}, F=sqrt(rho*): {np.median(its[:, 1]):g}, "
      f"F=equilibrated: {np.median(its[:, 2]):g}; ordered on {sum(r['ordered'] for r in rows)}/{len(rows)}")
