"""Compare a trained bound on a tiny problem with a Monte-Carlo log marginal likelihood."""
import argparse

from vargplvm.experiments import lower_bound_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=1_000_000)
    args = ap.parse_args()
    r = lower_bound_experiment(seed=args.seed, samples=args.samples)
    print(f"bound {r['bound']:.4f}  MC {r['mc']:.4f} +- {r['mc_se']:.4f}")


if __name__ == "__main__":
    main()
