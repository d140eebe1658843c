"""Same sweep on random LPs, with both axes spanning a factor of 50 either
side of 1/gamma (``||DAE||`` in [1/50, 50], beta/alpha in [1/(50 gamma), 50/gamma]).

    python3 scripts/lp_sweep.py --trials 10 -o results/lp
"""
import argparse

from eqadmm import cli

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=10)
ap.add_argument("--max-iter", type=int, default=5000)
ap.add_argument("--steps", type=int, default=9)
ap.add_argument("-m", type=int, default=750)
ap.add_argument("-n", type=int, default=250)
ap.add_argument("-o", "--output", default="results/lp_sweep")
args = ap.parse_args()

k = args.steps
raise SystemExit(cli.main([
    "sweep", "--gen", "lp", "-m", str(args.m), "-n", str(args.n),
    "--grid", f"0.02:50:{k},0.02:50:{k}", "--step-unit", "inv-gamma",
    "--trials", str(args.trials), "--max-iter", str(args.max_iter), "-o", args.output,
]))
