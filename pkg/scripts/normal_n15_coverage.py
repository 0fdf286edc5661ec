"""Coverage of I1-I4 for the median of N(0,1) samples of size 15.

    python scripts/normal_n15_coverage.py --scale desk --workers 4

Prints lower / upper / two-sided coverage beside reference values and
writes the report JSON and CSV next to ``--out``.
"""

import argparse
import sys
import time
from pathlib import Path

from smoothboot.study import StudyConfig, run_coverage_study

REFERENCE = {  # lower, upper, two-sided
    "I1": (0.096, 0.894, 0.798),
    "I2": (0.067, 0.938, 0.871),
    "I3": (0.057, 0.932, 0.875),
    "I4": (0.049, 0.942, 0.893),
}

SCALES = {
    "desk": dict(replications=400, b_first=1000, b_outer=500, b_inner=300),
    "full": dict(replications=1000, b_first=1000, b_outer=1500, b_inner=1000),
    "smoke": dict(replications=20, b_first=200, b_outer=30, b_inner=30),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, default=20240601)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--unit-variance-kernel", action="store_true")
    p.add_argument("--out", default="runs/normal_n15")
    args = p.parse_args()

    settings = dict(SCALES[args.scale])
    if args.replications:
        settings["replications"] = args.replications
    cfg = StudyConfig(model="std_normal", n=15, q=0.5, seed=args.seed,
                      unit_variance_kernel=args.unit_variance_kernel, **settings)

    t0 = time.perf_counter()
    report = run_coverage_study(cfg, workers=args.workers,
                                progress=lambda d, t: print(f"\r{d}/{t}", end="", file=sys.stderr))
    print(f"\n{time.perf_counter() - t0:.0f}s", file=sys.stderr)

    print(f"R={cfg.replications}  B=({cfg.b_first},{cfg.b_outer},{cfg.b_inner})  seed={cfg.seed}")
    print(f"{'method':<7}{'lower':>8}{'ref':>7}{'upper':>9}{'ref':>7}{'2-sided':>9}{'ref':>7}")
    for m, (lo, up, two) in REFERENCE.items():
        got = (report.coverage(m, 0.95), report.coverage(m, 0.05), report.two_sided_row(m).coverage)
        print(f"{m:<7}{got[0]:8.3f}{lo:7.3f}{got[1]:9.3f}{up:7.3f}{got[2]:9.3f}{two:7.3f}")
    print(f"(largest two-sided se {max(r.se for r in report.two_sided):.3f})")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".json").write_text(report.to_json())
    out.with_suffix(".csv").write_text(report.to_csv())


if __name__ == "__main__":
    main()
