#!/usr/bin/env python3
"""Martingale z-score battery and quadratic-variation check on a
stationary ensemble.

Example:
    python3 scripts/run_martingale_battery.py --n-paths 10000
"""

import argparse

import numpy as np

import gshs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-paths", type=int, default=10_000)
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=0.002)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    phi1 = gshs.quadratic_potential(1)
    phi2 = gshs.quadratic_potential(1)
    mu = gshs.GibbsMeasure(phi1=phi1, phi2=phi2)
    cfg = gshs.SdeConfig(eps=1.0, t_end=args.t_end, dt=args.dt,
                         n_paths=args.n_paths, seed=args.seed)
    paths = gshs.simulate_gshs(phi1, phi2,
                               gshs.InitialDistribution.stationary(mu),
                               cfg, workers=args.workers)

    g = gshs.velocity_coordinate(0, 1)
    M = gshs.martingale_process(paths, g, phi1, phi2, rule="left")
    s, t = 0.25 * args.t_end, 0.75 * args.t_end
    for zs in gshs.martingale_zscores(
            M, paths.times, s, t,
            gshs.default_weight_battery(paths, M, s)):
        print(f"weight {zs.weight}: z = {zs.z:+.3f}")

    qv, se = gshs.empirical_quadratic_variation(M)
    comp = gshs.quadratic_compensator(paths, g, phi1, phi2, rule="left")
    print(f"QV({args.t_end:g}) = {qv[-1]:.4f} +- {se[-1]:.4f} "
          f"(compensator {float(np.mean(comp[:, -1])):.4f})")


if __name__ == "__main__":
    main()
