"""Semi-supervised regression benchmark over missing-input fractions.

Writes rows (missing_fraction, method, mse, stderr) to stdout or --out.
"""
import argparse

from vargplvm.io import write_csv
from vargplvm.semisup import BenchConfig, semisup_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--fractions", type=float, nargs="+",
                    default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()
    rows = semisup_benchmark(BenchConfig(seeds=tuple(args.seeds), fractions=tuple(args.fractions),
                                         workers=args.workers))
    if args.out:
        write_csv(args.out, rows, header=["missing_fraction", "method", "mse", "stderr"])
    for frac, method, mse, se in rows:
        print(f"{frac:.1f} {method:16s} {mse:.4f} +- {se:.4f}")


if __name__ == "__main__":
    main()
