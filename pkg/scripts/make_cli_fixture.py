"""Regenerate the small model and golden reconstruction used by the CLI tests.

Run once from the repository root; the outputs are committed under tests/fixtures.
"""
import os

import numpy as np

from vargplvm.cli import main
from vargplvm.io import write_csv

HERE = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


def build(out_dir=HERE):
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(7)
    t = np.linspace(0, 3, 25)
    Y = np.column_stack([np.sin(t), np.cos(2 * t), t / 3, np.sin(t) * np.cos(t)])
    Y += 0.05 * rng.standard_normal(Y.shape)
    data = os.path.join(out_dir, "toy.csv")
    write_csv(data, Y)
    model = os.path.join(out_dir, "toy_model.json")
    assert main(["train", "--data", data, "--model", model, "--latent-dim", "2",
                 "--inducing", "8", "--iters", "60", "--fixed-beta-iters", "20",
                 "--precision", "base64"]) == 0
    test = Y[[2, 11, 19]] + 0.02
    test[:, [1, 3]] = np.nan
    test_path = os.path.join(out_dir, "toy_test.csv")
    write_csv(test_path, test)
    golden = os.path.join(out_dir, "toy_golden.csv")
    assert main(["reconstruct", "--model", model, "--test", test_path, "--out", golden,
                 "--infer-iters", "100"]) == 0
    for extra in ("toy_model.trace.csv", "toy_model.ard.txt"):
        os.remove(os.path.join(out_dir, extra))


if __name__ == "__main__":
    build()
