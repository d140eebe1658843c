"""Iteration counts of graph projection splitting over a (||DAE||, beta/alpha)
grid on random 750 x 250 lasso instances, averaged over seeds.

    python3 scripts/lasso_sweep.py --trials 10 --max-iter 3000 -o results/lasso
"""
import argparse

from eqadmm import cli

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=10)
ap.add_argument("--max-iter", type=int, default=3000)
ap.add_argument("--steps", type=int, default=9)
ap.add_argument("-m", type=int, default=750)
ap.add_argument("-n", type=int, default=250)
ap.add_argument("-o", "--output", default="results/lasso_sweep")
args = ap.parse_args()

k = args.steps
raise SystemExit(cli.main([
    "sweep", "--gen", "lasso", "-m", str(args.m), "-n", str(args.n),
    "--grid", f"0.01:100:{k},0.01:100:{k}", "--step-unit", "gamma",
    "--trials", str(args.trials), "--max-iter", str(args.max_iter), "-o", args.output,
]))
