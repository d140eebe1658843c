"""Iterations, final ratios and condition-number reduction of Ruiz and
Sinkhorn-Knopp on Gaussian matrices with optionally spread column scales.

    python3 scripts/equilibration_stats.py --col-decades 3
"""
import argparse
import time

import numpy as np

from eqadmm.equilibration import ruiz, sinkhorn_knopp
from eqadmm.problems import gen_gaussian

ap = argparse.ArgumentParser()
ap.add_argument("--count", type=int, default=20)
ap.add_argument("--col-decades", type=float, default=0.0)
ap.add_argument("-m", type=int, default=750)
ap.add_argument("-n", type=int, default=250)
ap.add_argument("-p", type=float, default=2.0)
args = ap.parse_args()

for name, algo in (("ruiz", ruiz), ("sinkhorn", sinkhorn_knopp)):
    its, factors = [], []
    t0 = time.perf_counter()
    for seed in range(args.count):
        A = gen_gaussian(args.m, args.n, seed, args.col_decades)
        _, rep = algo(A, p=args.p)
        its.append(rep.iterations)
        factors.append(rep.kappa_before / rep.kappa_after)
    dt = time.perf_counter() - t0
    print(f"{name:9s} iterations median {np.median(its):g} max {max(its)}; kappa reduction "
          f"median {np.median(factors):.3g} min {min(factors):.3g}; {dt:.2f}s incl. SVDs")
