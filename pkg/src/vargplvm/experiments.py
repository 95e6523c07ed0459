"""Desk-scale experiments shared by the acceptance suite and scripts/.

Each function is seeded and returns plain numbers so callers can print or
assert on them.
"""
import time

import numpy as np
from scipy.special import logsumexp

from .bound import OutputData, lower_bound, value_and_grad
from .data import cluster_latent_data, mackey_glass, two_class_data
from .exact_gp import ExactGP
from .kernels import Bias, RbfArd, Sum
from .model import Model
from .predict import InferConfig, autoregress_dataset, iterative_predict, log_density
from .training import TrainConfig, ard_report, fit, initialize, pca_scores, train
from .variational import FactorizedQ, LatentPrior

__all__ = ["nn_error", "ard_experiment", "mackey_glass_experiment", "mc_log_marginal",
           "lower_bound_experiment", "bound_timing", "density_classification"]


def nn_error(X, labels):
    """Leave-one-out 1-nearest-neighbour misclassifications."""
    D = np.sum((X[:, None, :] - X[None, :, :]) ** 2, -1)
    np.fill_diagonal(D, np.inf)
    return int(np.sum(labels[D.argmin(1)] != labels))


def ard_experiment(seed, q=8, m=30, n=150, iters=1000, threshold=0.01):
    """Fit q latent dimensions to data from a 2-D latent space.

    Returns the number of switched-off dimensions and the NN errors of the two
    dominant dimensions and of PCA-2D.
    """
    Y, _, labels = cluster_latent_data(n=n, seed=seed)
    model = fit(Y, TrainConfig(latent_dim=q, num_inducing=m, fixed_beta_iters=100,
                               main_iters=iters, seed=seed))
    report = ard_report(model, threshold)
    off = sum(1 for _, _, r in report.entries if r < threshold)
    top = report.dominant[:2]
    return {"switched_off": off,
            "nn_latent": nn_error(model.q.mean[:, top], labels),
            "nn_pca": nn_error(pca_scores(Y - Y.mean(0), 2), labels),
            "weights": [r for _, _, r in report.entries]}


def mackey_glass_experiment(seed=0, tau=16, n_train=96, steps=180, m=40, prior_var=0.01,
                            iters=1000):
    """Iterative prediction MSE of three models on a standardised series."""
    y = mackey_glass(n_train + steps)
    mu, sd = y[:n_train].mean(), y[:n_train].std()
    ys = (y - mu) / sd
    truth = ys[n_train:]
    Zh, Yh = autoregress_dataset(ys[:n_train], tau)
    prior = LatentPrior("uncertain", Z=Zh, var=np.full(tau, prior_var), fix_var=True,
                        fix_means=True)
    model = fit(Yh, TrainConfig(latent_dim=tau, num_inducing=m, fixed_beta_iters=100,
                                main_iters=iters, seed=seed, init_variance=prior_var),
                prior=prior)
    start = ys[n_train - tau:n_train]
    prop, _ = iterative_predict(model, start, steps)

    # naive autoregressive GP: exact GP on the windows, means fed back
    gp = ExactGP(RbfArd(tau, 1.0, np.full(tau, 1.0 / tau)), 0.01).fit(Zh, Yh)
    window, naive = start.copy(), []
    for _ in range(steps):
        mean, _ = gp.predict(window[None])
        naive.append(mean[0, 0])
        window = np.r_[window[1:], mean[0, 0]]

    # stationary GP on the time index
    t = np.arange(n_train, dtype=float)[:, None]
    gpt = ExactGP(RbfArd(1, 1.0, [0.1]), 0.01).fit(t, ys[:n_train])
    on_time, _ = gpt.predict(np.arange(n_train, n_train + steps, dtype=float)[:, None])

    mse = lambda a: float(np.mean((np.ravel(a) - truth) ** 2))
    return {"propagated": mse(prop), "naive": mse(naive), "time": mse(on_time)}


def mc_log_marginal(kernel, noise_var, Y, samples, seed=0, batch=100_000):
    """Monte-Carlo estimate of log p(Y) under X ~ N(0, I); returns (estimate, stderr).

    ``kernel`` must be an RbfArd.  The standard error is propagated from the
    sample mean of the likelihood ratios through the log.
    """
    if not isinstance(kernel, RbfArd):
        raise TypeError("mc_log_marginal supports an RbfArd kernel")
    rng = np.random.default_rng(seed)
    n, p = Y.shape
    q = kernel.input_dim
    logs = []
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        X = rng.standard_normal((b, n, q))
        r2 = np.einsum("bijk,k->bij", (X[:, :, None, :] - X[:, None, :, :]) ** 2, kernel.weights)
        K = kernel.variance * np.exp(-0.5 * r2) + noise_var * np.eye(n)
        L = np.linalg.cholesky(K)
        half_logdet = np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), 1)
        alpha = np.linalg.solve(L, np.broadcast_to(Y, (b, n, p)))
        logs.append(-0.5 * n * p * np.log(2 * np.pi) - p * half_logdet
                    - 0.5 * np.sum(alpha ** 2, (1, 2)))
        done += b
    ll = np.concatenate(logs)
    est = float(logsumexp(ll) - np.log(ll.size))
    w = np.exp(ll - ll.max())
    se = float(w.std(ddof=1) / np.sqrt(w.size) / w.mean())
    return est, se


def lower_bound_experiment(seed=0, samples=1_000_000, n=5, p=2, m=3, beta=25.0):
    """Trained bound versus a Monte-Carlo estimate of the marginal likelihood.

    The kernel (unit variance and weight) and noise precision are held fixed so
    that the marginal likelihood keeps a real dependence on X; with free
    hyperparameters five points are best explained as pure noise.
    """
    x = np.linspace(-1.5, 1.5, n)
    rng = np.random.default_rng(seed)
    Y = np.column_stack([np.sin(2 * x), np.cos(2 * x)]) + 0.1 * rng.standard_normal((n, p))
    kernel = RbfArd(1, 1.0, [1.0])
    kernel.fixed = {"variance", "weights"}
    cfg = TrainConfig(latent_dim=1, num_inducing=m, fixed_beta_iters=0, main_iters=500,
                      seed=seed, kernel="rbfard")
    model = initialize(Y, cfg, kernel=kernel)
    model.beta, model.fix_beta = beta, True
    train(model, cfg)
    est, se = mc_log_marginal(model.kernel, 1.0 / beta, model.output.Y, samples, seed=seed + 1)
    return {"bound": float(lower_bound(model)), "mc": est, "mc_se": se}


def bound_timing(n, m=30, p=10, q=5, repeats=7, seed=0):
    """Median wall time of one bound-and-gradient evaluation of the standard variant."""
    rng = np.random.default_rng(seed)
    kernel = Sum([RbfArd(q, 1.0, np.full(q, 0.5)), Bias(0.1)])
    qx = FactorizedQ(rng.standard_normal((n, q)), rng.uniform(0.1, 1.0, (n, q)))
    model = Model(kernel, rng.standard_normal((m, q)), qx, 10.0,
                  OutputData.from_Y(rng.standard_normal((n, p))))
    value_and_grad(model)   # warm caches
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        value_and_grad(model)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def density_classification(seed=0, n_train=50, n_test=50, q=2, m=15, iters=300):
    """Accuracy of per-class models with the larger test log density winning."""
    classes = two_class_data(n_per_class=n_train + n_test, seed=seed)
    models = [fit(Y[:n_train], TrainConfig(latent_dim=q, num_inducing=m, fixed_beta_iters=50,
                                           main_iters=iters, seed=seed))
              for Y in classes]
    icfg = InferConfig(iters=100)
    correct = total = 0
    for c, Y in enumerate(classes):
        for y in Y[n_train:]:
            scores = [log_density(y[None], mdl, icfg) for mdl in models]
            correct += int(np.argmax(scores) == c)
            total += 1
    return {"accuracy": correct / total, "n_test": total}
