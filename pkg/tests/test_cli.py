import os

import numpy as np
import pytest

from vargplvm.cli import EXIT_ARGS, EXIT_IO, EXIT_OK, main, read_config_file, resolve
from vargplvm.errors import ArgumentError
from vargplvm.io import load_model, read_csv, write_csv

FIX = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def small_csv(tmp_path):
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((10, 3)) + np.linspace(0, 1, 10)[:, None]
    path = tmp_path / "d.csv"
    write_csv(path, Y)
    return str(path), Y


def _train(data, model, *extra):
    return main(["train", "--data", data, "--model", model, "--latent-dim", "2",
                 "--inducing", "5", "--iters", "20", "--fixed-beta-iters", "5", *extra])


def test_train_writes_three_artifacts(tmp_path, small_csv):
    model = str(tmp_path / "m.json")
    assert _train(small_csv[0], model) == EXIT_OK
    for suffix in (".json", ".trace.csv", ".ard.txt"):
        assert os.path.getsize(str(tmp_path / "m") + suffix) > 0
    trace, names = read_csv(tmp_path / "m.trace.csv", header=True)
    assert names == ["iter", "bound", "beta"]
    assert np.all(np.diff(trace[:, 1]) >= -1e-8)


def test_train_is_deterministic(tmp_path, small_csv):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    assert _train(small_csv[0], a) == EXIT_OK
    assert _train(small_csv[0], b) == EXIT_OK
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_train_argument_and_io_errors(tmp_path, small_csv, capsys):
    model = str(tmp_path / "m.json")
    assert main(["train", "--data", small_csv[0], "--model", model, "--latent-dim", "11"]) == EXIT_ARGS
    assert "latent-dim" in capsys.readouterr().err
    assert _train(str(tmp_path / "none.csv"), model) == EXIT_IO
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5\n")
    assert _train(str(bad), model) == EXIT_IO
    assert "line 2" in capsys.readouterr().err
    assert main(["train", "--bogus"]) == EXIT_ARGS
    assert main(["train", "--data", small_csv[0], "--model", model, "--kernel", "rbf*"]) == EXIT_ARGS


def test_reconstruct_matches_golden(tmp_path):
    out = str(tmp_path / "r.csv")
    assert main(["reconstruct", "--model", os.path.join(FIX, "toy_model.json"),
                 "--test", os.path.join(FIX, "toy_test.csv"), "--out", out,
                 "--infer-iters", "100"]) == EXIT_OK
    got, names = read_csv(out, header=True)
    want, want_names = read_csv(os.path.join(FIX, "toy_golden.csv"), header=True)
    assert names == want_names
    np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-6)
    assert np.all(got[:, 2:] >= 0)


def test_reconstruct_rejects_fully_observed(tmp_path, capsys):
    out = str(tmp_path / "r.csv")
    code = main(["reconstruct", "--model", os.path.join(FIX, "toy_model.json"),
                 "--test", os.path.join(FIX, "toy.csv"), "--out", out])
    assert code == EXIT_ARGS
    assert "density" in capsys.readouterr().err


def test_density_per_row(tmp_path):
    out = str(tmp_path / "d.csv")
    test = tmp_path / "t.csv"
    Y, _ = read_csv(os.path.join(FIX, "toy.csv"))
    write_csv(test, np.vstack([Y[:2], Y[:1] + 3.0]))
    assert main(["density", "--model", os.path.join(FIX, "toy_model.json"), "--test", str(test),
                 "--out", out, "--infer-iters", "50"]) == EXIT_OK
    d, _ = read_csv(out, header=True)
    assert d.shape == (3, 2)
    assert d[2, 1] < min(d[0, 1], d[1, 1])


def test_forecast_reproduces_training_means(tmp_path):
    n = 15
    t = np.linspace(0, 3, n)[:, None]
    Y = np.column_stack([np.sin(t[:, 0]), np.cos(t[:, 0]), t[:, 0]])
    write_csv(tmp_path / "y.csv", Y)
    write_csv(tmp_path / "t.csv", t)
    model = str(tmp_path / "m.json")
    assert main(["train", "--variant", "dynamical", "--data", str(tmp_path / "y.csv"),
                 "--timestamps", str(tmp_path / "t.csv"), "--model", model, "--latent-dim", "2",
                 "--inducing", "5", "--iters", "20", "--fixed-beta-iters", "5"]) == EXIT_OK
    out = str(tmp_path / "f.csv")
    assert main(["forecast", "--model", model, "--test-timestamps", str(tmp_path / "t.csv"),
                 "--out", out]) == EXIT_OK
    f, names = read_csv(out, header=True)
    assert names[:3] == ["t", "x_mean_0", "x_mean_1"]
    m = load_model(model)
    M, _ = m.q.marginals(m.prior.covariance())
    np.testing.assert_allclose(f[:, 1:3], M, rtol=1e-8, atol=1e-8)


def test_autoregress_row_count(tmp_path):
    y = np.sin(0.4 * np.arange(30))[:, None]
    write_csv(tmp_path / "s.csv", y)
    out = str(tmp_path / "a.csv")
    assert main(["autoregress", "--data", str(tmp_path / "s.csv"), "--tau", "4", "--out", out,
                 "--inducing", "10", "--iters", "20", "--fixed-beta-iters", "5",
                 "--steps", "3"]) == EXIT_OK
    a, _ = read_csv(out, header=True)
    assert a.shape == (26, 4)
    np.testing.assert_array_equal(a[:, 0], np.arange(4, 30))
    it, _ = read_csv(str(tmp_path / "a.iterative.csv"), header=True)
    assert it.shape == (3, 3)


def test_config_file_and_override(tmp_path, small_csv):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# small run\ndata = {small_csv[0]}\nlatent-dim=3\niters = 7\nheader=no\n")
    rc = resolve(["train", "--config", str(cfg), "--iters", "9"])
    assert rc.latent_dim == 3 and rc.iters == 9 and rc.header is False
    assert rc.data == small_csv[0]
    cfg.write_text("colour = blue\n")
    with pytest.raises(ArgumentError, match="unknown key"):
        read_config_file(cfg)
    assert main(["train", "--config", str(cfg)]) == EXIT_ARGS


def test_semisup_on_data_file(tmp_path):
    from vargplvm.data import semisup_data
    Z, Y = semisup_data(40, q=3, p=2, seed=2)
    D = np.hstack([Z[:30], Y[:30]])
    D[20:, 1] = np.nan
    write_csv(tmp_path / "zy.csv", D)
    write_csv(tmp_path / "zt.csv", Z[30:])
    out = str(tmp_path / "p.csv")
    assert main(["semisup", "--data", str(tmp_path / "zy.csv"), "--input-cols", "3",
                 "--test", str(tmp_path / "zt.csv"), "--out", out, "--inducing", "8",
                 "--iters", "30", "--fixed-beta-iters", "10", "--infer-iters", "20"]) == EXIT_OK
    P, names = read_csv(out, header=True)
    assert names == ["mean_0", "mean_1", "var_0", "var_1"]
    assert P.shape == (10, 4) and np.all(P[:, 2:] > 0)
    assert main(["semisup", "--data", str(tmp_path / "zy.csv"), "--input-cols", "5",
                 "--test", str(tmp_path / "zt.csv"), "--out", out]) == EXIT_ARGS
