"""Two-class classification by comparing per-class test log densities."""
import argparse

from vargplvm.experiments import density_classification


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--train", type=int, default=50)
    ap.add_argument("--test", type=int, default=50)
    args = ap.parse_args()
    r = density_classification(seed=args.seed, n_train=args.train, n_test=args.test)
    print(f"accuracy {r['accuracy']:.3f} on {r['n_test']} points")


if __name__ == "__main__":
    main()
