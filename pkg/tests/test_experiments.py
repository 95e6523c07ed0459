import numpy as np

from vargplvm.exact_gp import log_marginal
from vargplvm.experiments import mc_log_marginal, nn_error
from vargplvm.kernels import RbfArd


def test_nn_error_counts_mislabelled_neighbours():
    X = np.array([[0.0], [0.1], [5.0], [5.1], [0.2]])
    assert nn_error(X, np.array([0, 0, 1, 1, 0])) == 0
    assert nn_error(X, np.array([0, 0, 1, 1, 1])) == 1


def test_mc_matches_exact_when_inputs_do_not_matter():
    # a zero-variance kernel leaves only the noise, so every sample agrees
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((4, 2))
    k = RbfArd(1, 1e-300, [1.0])
    est, se = mc_log_marginal(k, 0.3, Y, 1000)
    assert abs(est - log_marginal(RbfArd(1, 1e-300, [1.0]), np.zeros((4, 1)), Y, 0.3)) < 1e-12
    assert se < 1e-12


def test_mc_batch_matches_loop():
    rng = np.random.default_rng(1)
    Y = rng.standard_normal((3, 2))
    k = RbfArd(1, 1.2, [0.7])
    est, _ = mc_log_marginal(k, 0.2, Y, 2000, seed=5, batch=500)
    X = np.random.default_rng(5).standard_normal((2000, 3, 1))
    ll = np.array([log_marginal(k, x, Y, 0.2) for x in X])
    assert abs(est - (np.logaddexp.reduce(ll) - np.log(ll.size))) < 1e-10
