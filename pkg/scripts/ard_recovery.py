"""Fit an 8-dimensional latent space to data from a 2-D latent GP draw and
report how many ARD weights switch off per seed."""
import argparse

from vargplvm.experiments import ard_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--latent-dim", type=int, default=8)
    ap.add_argument("--iters", type=int, default=1000)
    args = ap.parse_args()
    print("seed,switched_off,nn_latent,nn_pca")
    for seed in range(args.seeds):
        r = ard_experiment(seed, q=args.latent_dim, iters=args.iters)
        print(f"{seed},{r['switched_off']},{r['nn_latent']},{r['nn_pca']}", flush=True)


if __name__ == "__main__":
    main()
