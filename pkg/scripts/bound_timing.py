"""Wall time of one bound-and-gradient evaluation as n grows (single BLAS thread)."""
import argparse

from threadpoolctl import threadpool_limits

from vargplvm.experiments import bound_timing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000, 8000])
    ap.add_argument("--inducing", type=int, default=30)
    ap.add_argument("--outputs", type=int, default=10)
    args = ap.parse_args()
    print("n,seconds")
    with threadpool_limits(limits=1):
        for n in args.sizes:
            print(f"{n},{bound_timing(n, m=args.inducing, p=args.outputs):.4f}", flush=True)


if __name__ == "__main__":
    main()
