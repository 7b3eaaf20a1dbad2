#!/usr/bin/env python3
"""Print the rate-coefficient ladder and its Laplace/limit cross-checks.

Quick desk check that the scale-dependent coefficients behave before
launching the full certification study.

    python3 scripts/rate_table.py [--ladder 0.2,0.1,0.05,0.02]
"""
import argparse
import math

from kramerslab import gibbs
from kramerslab.enthalpy import quartic_default
from kramerslab.transition import k_eps, limit_rate, q_eps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ladder", default="0.2,0.1,0.05,0.02")
    args = ap.parse_args()
    ladder = [float(v) for v in args.ladder.split(",")]

    prof = quartic_default()
    k = limit_rate(prof)
    print(f"limit rate k = {k:.12f}   (k/2 = {0.5 * k:.12f})")
    print(f"{'eps':>6} {'Z_eps':>12} {'Z/lapl-1':>10} {'Ish/lapl-1':>10} "
          f"{'k_eps':>10} {'2k_eps/k':>10} {'1-4q_eps':>10}")
    for eps in ladder:
        z = math.exp(gibbs.log_partition(prof, eps))
        ish = math.exp(gibbs.log_barrier_integral(prof, eps))
        ke = k_eps(prof, eps)
        qe = q_eps(prof, eps)
        print(f"{eps:6.3f} {z:12.6e} {z / gibbs.laplace_z(prof, eps) - 1:10.3e} "
              f"{ish / gibbs.laplace_i_shifted(prof, eps) - 1:10.3e} "
              f"{ke:10.6f} {2 * ke / k:10.6f} {1 - 4 * qe:10.3e}")


if __name__ == "__main__":
    main()
