#!/usr/bin/env python3
"""Unequal-well experiment: tilted landscape vs the two-rate limit system.

The tilt fixes only the ratio of the forward/backward rates (exp(gap)); the
pair normalization used here is the geometric-mean convention
sqrt(k_f k_b) = k, which reduces to the symmetric case at zero gap. The
script reports (a) the stationary well-mass ratio of the tilted landscape
approaching exp(-gap) down the ladder and (b) the two-rate limit dynamics
relaxing to the matching detailed-balance split. The convention is
demonstrated, not asserted: only the ratio is pinned by the landscape.

    python3 scripts/skewed_wells.py [--gap 0.693]
"""
import argparse
import math

import numpy as np

from kramerslab.enthalpy import quartic_default, skewed
from kramerslab.evolve_limit import solve_limit
from kramerslab.grid_forms import LimitField, assemble_limit_rates
from kramerslab.quadrature import adaptive_integral
from kramerslab.transition import limit_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gap", type=float, default=math.log(2.0))
    ap.add_argument("--ladder", default="0.2,0.1,0.05")
    args = ap.parse_args()
    gap = args.gap
    ladder = [float(v) for v in args.ladder.split(",")]

    prof = quartic_default()
    print(f"gap = {gap:.6f}, target stationary mass ratio exp(-gap) = "
          f"{math.exp(-gap):.6f}")
    for eps in ladder:
        h_eps = skewed(prof, gap, eps)
        m_plus, _ = adaptive_integral(
            lambda s: math.exp(-h_eps(s)), 0.0, 1.0, 1e-10)
        m_minus, _ = adaptive_integral(
            lambda s: math.exp(-h_eps(s)), -1.0, 0.0, 1e-10)
        ratio = m_plus / m_minus
        print(f"  eps = {eps:5.3f}: mass(+)/mass(-) = {ratio:.6f} "
              f"(deviation {abs(ratio - math.exp(-gap)):.2e})")

    k = limit_rate(prof)
    kf = k * math.exp(gap / 2.0)   # minus -> plus
    kb = k * math.exp(-gap / 2.0)  # plus -> minus
    print(f"\ntwo-rate limit system with kf = {kf:.6f}, kb = {kb:.6f} "
          f"(geometric mean {math.sqrt(kf * kb):.6f} = k)")
    x = np.linspace(0.0, 1.0, 65)
    lforms = assemble_limit_rates(x, kf, kb)
    traj = solve_limit(lforms, LimitField(np.zeros(65), np.ones(65), x),
                       T=3.0, dt=1e-3, snapshot_times=(3.0,))
    final = traj.snapshot_at(3.0)
    um, up = float(final.u_minus.mean()), float(final.u_plus.mean())
    print(f"  t = 3: mean u_minus/u_plus = {um / up:.6f} "
          f"(detailed balance kb/kf = {kb / kf:.6f})")


if __name__ == "__main__":
    main()
