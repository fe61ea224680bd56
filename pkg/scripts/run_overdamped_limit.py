#!/usr/bin/env python3
"""Energy distance of the position law to the analytic limit across eps.

Example:
    python3 scripts/run_overdamped_limit.py --n-paths 20000 --out out/odl
"""

import argparse
from pathlib import Path

import gshs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps-grid", type=float, nargs="+",
                    default=[0.4, 0.2, 0.1])
    ap.add_argument("--times", type=float, nargs="+", default=[0.5, 1.0])
    ap.add_argument("--n-paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--dt", default="auto",
                    help='step size, or "auto" for the smallest-eps '
                         "stiffness step (default)")
    ap.add_argument("--stat-cap", type=int, default=20_000,
                    help="statistic subsample cap per group")
    ap.add_argument("--out", type=Path, default=Path("out/odl"))
    args = ap.parse_args()

    dt = args.dt if args.dt == "auto" else float(args.dt)
    phi1 = gshs.quadratic_potential(1)
    phi2 = gshs.quadratic_potential(1)
    report = gshs.overdamped_limit_experiment(
        phi1, phi2, args.eps_grid, args.times, args.n_paths, args.seed,
        dt=dt, workers=args.workers, stat_cap=args.stat_cap)

    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "overdamped_limit.csv")
    for line in report.summary_lines():
        print(line)
    for row in report.rows:
        print("  eps=%g  distance=%.4e  p=%.4f" % tuple(row))


if __name__ == "__main__":
    main()
