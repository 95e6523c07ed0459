"""Synthetic data generators used by tests, scripts and benchmarks."""
import numpy as np

from .errors import ArgumentError
from .kernels import RbfArd

__all__ = ["mackey_glass", "gp_sample", "cluster_latent_data", "two_class_data",
           "semisup_data", "sine_sequences"]


def mackey_glass(n, tau=17, a=0.2, b=0.1, x0=1.2, substeps=10, burn_in=300):
    """Mackey-Glass series dx/dt = a x(t-tau) / (1 + x(t-tau)^10) - b x(t).

    Integrated with fixed-step RK4 (step 1/substeps) holding the delayed term
    piecewise linear; sampled at unit time intervals after a burn-in.
    """
    if n < 1:
        raise ArgumentError("n must be positive")
    h = 1.0 / substeps
    lag = int(round(tau * substeps))
    total = (n + burn_in) * substeps + 1
    x = np.empty(total + lag)
    x[:lag + 1] = x0

    def f(xt, xd):
        return a * xd / (1.0 + xd ** 10) - b * xt

    for i in range(lag, total + lag - 1):
        xd0, xd1 = x[i - lag], x[i - lag + 1]
        xdm = 0.5 * (xd0 + xd1)
        xi = x[i]
        k1 = f(xi, xd0)
        k2 = f(xi + 0.5 * h * k1, xdm)
        k3 = f(xi + 0.5 * h * k2, xdm)
        k4 = f(xi + h * k3, xd1)
        x[i + 1] = xi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    series = x[lag:][::substeps]
    return series[burn_in:burn_in + n].copy()


def gp_sample(X, p, rng, kernel=None, jitter=1e-8):
    """p independent draws of a zero-mean GP at inputs X (n x p)."""
    X = np.atleast_2d(X)
    kernel = kernel or RbfArd(X.shape[1], 1.0, np.ones(X.shape[1]))
    K = kernel.K(X)
    L = np.linalg.cholesky(K + jitter * np.mean(np.diag(K)) * np.eye(K.shape[0]))
    return L @ rng.standard_normal((X.shape[0], p))


def cluster_latent_data(n=150, p=12, noise=0.05, seed=0, spread=0.4):
    """Three clusters in a 2-D latent space mapped through a GP draw.

    Returns ``(Y, X, labels)``.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 3, n)
    centres = np.array([[0.0, 2.0], [2.0, -1.0], [-2.0, -1.0]])
    X = centres[labels] + spread * rng.standard_normal((n, 2))
    F = gp_sample(X, p, rng, RbfArd(2, 1.0, [0.5, 0.5]))
    return F + noise * rng.standard_normal((n, p)), X, labels


def two_class_data(n_per_class=100, p=5, noise=0.05, seed=0):
    """Two classes, each a 1-D manifold embedded by its own GP draw."""
    rng = np.random.default_rng(seed)
    out = []
    for c in range(2):
        x = rng.uniform(-2.0, 2.0, (n_per_class, 1))
        F = gp_sample(x, p, rng, RbfArd(1, 1.0, [1.0]))
        F = F + 1.5 * (2 * c - 1)
        out.append(F + noise * rng.standard_normal(F.shape))
    return out


def semisup_data(n, q=15, p=5, seed=0, noise=0.1):
    """Inputs Z drawn as correlated GP features of a low-dimensional source,
    outputs Y a GP draw of Z plus noise.  Returns ``(Z, Y)``."""
    rng = np.random.default_rng(seed)
    h = rng.uniform(-1.0, 1.0, (n, 2))
    Z = gp_sample(h, q, rng, RbfArd(2, 1.0, [2.0, 2.0])) + 0.05 * rng.standard_normal((n, q))
    Y = gp_sample(Z, p, rng, RbfArd(q, 1.0, np.full(q, 0.5 / q)))
    return Z, Y + noise * rng.standard_normal((n, p))


def sine_sequences(lengths=(40,), p=6, noise=0.05, seed=0):
    """Noisy high-dimensional embeddings of a sine/cosine trajectory."""
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((2, p))
    Ys, ts = [], []
    for n in lengths:
        t = np.linspace(0.0, 4.0 * np.pi, n)
        X = np.column_stack([np.sin(t), np.cos(t)])
        Ys.append(np.tanh(X @ W) + noise * rng.standard_normal((n, p)))
        ts.append(t)
    return Ys, ts
