"""Simulated I1 coverage deviation against the analytic n^{-1/2} term.

    python scripts/error_term_check.py --model lognormal --q 0.5 --ns 25 50 100 200
"""

import argparse
import math

from smoothboot.cli import predicted_i1_coverage
from smoothboot.study import StudyConfig, run_coverage_study


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", default="std_lognormal")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--alphas", type=float, nargs="+", default=[0.05, 0.95])
    p.add_argument("--ns", type=int, nargs="+", default=[25, 50, 100])
    p.add_argument("--replications", type=int, default=1000)
    p.add_argument("--b1", type=int, default=1000)
    p.add_argument("--seed", type=int, default=20240604)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    print(f"{'n':>5} {'alpha':>6} {'simulated':>10} {'se':>7} {'predicted':>10}")
    for n in args.ns:
        cfg = StudyConfig(model=args.model, n=n, q=args.q, alphas=tuple(args.alphas), methods=("I1",),
                          replications=args.replications, b_first=args.b1, seed=args.seed)
        report = run_coverage_study(cfg, workers=args.workers)
        for row in report.one_sided:
            nominal = 1 - row.alpha
            pred = predicted_i1_coverage(args.model, args.q, row.alpha, n) - nominal
            print(f"{n:5d} {row.alpha:6.2f} {row.coverage - nominal:+10.4f} {row.se:7.4f} {pred:+10.4f}")
    print(f"(predicted column is n^-1/2 times the analytic coefficient; first order only, "
          f"se scale {1 / math.sqrt(args.replications):.3f})")


if __name__ == "__main__":
    main()
