import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vargplvm.bound import OutputData, fhat, lower_bound, value_and_grad
from vargplvm.exact_gp import log_marginal, log_marginal_grad
from vargplvm.kernels import Bias, RbfArd, Sum
from vargplvm.model import Model
from vargplvm.psi import psi_statistics
from vargplvm.training import TrainConfig, fit
from vargplvm.variational import FactorizedQ

from conftest import random_model, rel_err, richardson_grad


def bound_at(model, x):
    mm = model.copy()
    mm.set_params(x)
    return lower_bound(mm)


def collapse_model(seed, n=15, q=2, p=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, q))
    k = RbfArd(q, rng.uniform(0.5, 2.0), rng.uniform(0.3, 1.5, q))
    Y = rng.standard_normal((n, p))
    qx = FactorizedQ(X, np.full((n, q), 1e-12), fixed=np.ones((n, q), bool))
    return Model(k, X.copy(), qx, rng.uniform(5.0, 50.0), OutputData.from_Y(Y)), X, Y


@pytest.mark.parametrize("variant", ["standard", "dynamical", "uncertain"])
@pytest.mark.parametrize("seed", [0, 1])
def test_gradients_match_fd(variant, seed):
    model = random_model(variant, seed)
    _, g = value_and_grad(model)
    x = model.get_params()
    fd = richardson_grad(lambda y: bound_at(model, y), x)
    assert np.max(rel_err(g, fd)) < 1e-5


def test_fixed_entries_get_zero_gradient():
    model = random_model("standard", 3)
    model.q.fixed[:4] = True
    model.fix_beta = True
    model.kernel.children[1].fixed = {"variance"}
    _, g = value_and_grad(model)
    assert np.all(g[model.fixed_mask()] == 0.0)
    assert np.any(g[~model.fixed_mask()] != 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_collapse_to_exact_gp(seed):
    model, X, Y = collapse_model(seed)
    psi = psi_statistics(model.kernel, X, model.q.var, model.Z)
    f = fhat(psi, model.kuu(), model.output, model.beta)
    exact = log_marginal(model.kernel, X, Y, 1.0 / model.beta)
    assert rel_err(f, exact) < 1e-4


def test_collapse_kernel_gradient_matches_exact_gp():
    model, X, Y = collapse_model(7)
    _, g = value_and_grad(model)
    off = dict((s[0], s[1]) for s in model.schema())["kernel_f"]
    gk = g[off:off + model.kernel.num_params]
    want, _ = log_marginal_grad(model.kernel, X, Y, 1.0 / model.beta)
    assert np.max(rel_err(gk, want)) < 1e-3


def test_zero_outputs_leave_data_independent_terms(rng):
    n, q, m, p = 8, 2, 4, 3
    k = RbfArd(q, 1.3, [0.5, 1.1])
    mu, S, Z = rng.standard_normal((n, q)), rng.uniform(0.1, 1, (n, q)), rng.standard_normal((m, q))
    beta = 7.0
    ps = psi_statistics(k, mu, S, Z)
    Kuu = k.K(Z) + 1e-6 * np.eye(m)
    A = Kuu / beta + ps.psi2
    want = (-0.5 * n * p * np.log(2 * np.pi) + 0.5 * n * p * np.log(beta)
            + 0.5 * p * np.linalg.slogdet(Kuu)[1]
            - 0.5 * p * (m * np.log(beta) + np.linalg.slogdet(A)[1])
            - 0.5 * p * beta * ps.psi0 + 0.5 * p * beta * np.trace(np.linalg.solve(Kuu, ps.psi2)))
    got = fhat(ps, Kuu, OutputData.from_Y(np.zeros((n, p))), beta)
    assert got == pytest.approx(want, rel=1e-10)


def test_raw_and_gram_forms_agree(rng):
    n, q, m = 6, 2, 3
    Y = rng.standard_normal((n, 10))
    k = RbfArd(q)
    mu, S, Z = rng.standard_normal((n, q)), rng.uniform(0.1, 1, (n, q)), rng.standard_normal((m, q))
    ps = psi_statistics(k, mu, S, Z)
    Kuu = k.K(Z) + 1e-6 * np.eye(m)
    raw = fhat(ps, Kuu, OutputData.from_Y(Y, use_gram=False), 3.0)
    gram = fhat(ps, Kuu, OutputData.from_gram(Y @ Y.T, 10), 3.0)
    assert raw == pytest.approx(gram, rel=1e-12)
    Q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
    rot = fhat(ps, Kuu, OutputData.from_Y(Y @ Q, use_gram=False), 3.0)
    assert raw == pytest.approx(rot, rel=1e-12)


def test_permutation_invariance():
    model = random_model("standard", 4)
    perm = np.random.default_rng(0).permutation(model.n)
    other = model.copy()
    other.q = FactorizedQ(model.q.mean[perm], model.q.var[perm])
    other.output = OutputData.from_Y(model.output.Y[perm])
    assert lower_bound(other) == pytest.approx(lower_bound(model), rel=1e-12)


def test_inflating_variances_lowers_trained_bound():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 1))
    Y = np.hstack([np.sin(2 * X), np.cos(X)]) + 0.05 * rng.standard_normal((30, 2))
    model = fit(Y, TrainConfig(latent_dim=1, num_inducing=8, fixed_beta_iters=20, main_iters=150))
    before = lower_bound(model)
    model.q.var = model.q.var * 100
    assert lower_bound(model) < before


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_bound_is_finite_on_random_models(seed):
    model = random_model("standard", seed, n=8, m=3, p=2)
    f, g = value_and_grad(model)
    assert np.isfinite(f) and np.all(np.isfinite(g))
    assert f == pytest.approx(lower_bound(model), rel=1e-12)
