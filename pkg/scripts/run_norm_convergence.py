#!/usr/bin/env python3
"""Embedded-norm convergence and generator summand norms for a bump.

Example:
    python3 scripts/run_norm_convergence.py --eps-grid 0.5 0.2 0.1 0.05
"""

import argparse
from pathlib import Path

import gshs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps-grid", type=float, nargs="+",
                    default=[0.5, 0.2, 0.1, 0.05])
    ap.add_argument("--out", type=Path, default=Path("out/norms"))
    args = ap.parse_args()

    phi1 = gshs.quadratic_potential(1)
    phi2 = gshs.quadratic_potential(1)
    f = gshs.product_bump([0.0], [1.0])

    report = gshs.norm_convergence_curve(f, phi1, phi2, args.eps_grid)
    args.out.mkdir(parents=True, exist_ok=True)
    report.write_csv(args.out / "norm_convergence.csv")
    for line in report.summary_lines():
        print(line)
    for row in report.rows:
        print("  eps=%g  direct=%.8f  limit=%.8f  rel_error=%.3e" %
              (row[0], row[1], row[3], row[5]))

    for eps in args.eps_grid:
        rep = gshs.generator_summand_norms(f, phi1, phi2, eps)
        print("  eps=%g  cutoff terms max=%.3e  term5 dist=%.3e  "
              "term6 dist=%.3e" % (eps, max(rep.term_norms),
                                   rep.term5_distance, rep.term6_distance))


if __name__ == "__main__":
    main()
