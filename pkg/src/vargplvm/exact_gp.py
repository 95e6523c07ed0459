"""Full (non-sparse) GP regression.

Serves two purposes: an independent oracle for the collapsed bound when the
inducing inputs coincide with the data, and a baseline regressor for the
time-series and semi-supervised experiments.
"""
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ArgumentError, NumericalError
from .linalg import cho_inverse, cho_solve, jitchol, logdet_chol

__all__ = ["log_marginal", "log_marginal_grad", "ExactGP"]


def log_marginal(kernel, X, Y, noise_var):
    """sum_j log N(y_j | 0, K + noise_var I)."""
    X = np.atleast_2d(X)
    Y = Y[:, None] if Y.ndim == 1 else Y
    n, p = Y.shape
    L, _ = jitchol(kernel.K(X) + noise_var * np.eye(n))
    alpha = cho_solve(L, Y)
    return float(-0.5 * n * p * np.log(2 * np.pi) - 0.5 * p * logdet_chol(L)
                 - 0.5 * np.sum(Y * alpha))


def log_marginal_grad(kernel, X, Y, noise_var):
    """Gradient w.r.t. the kernel log-parameters and log noise variance."""
    X = np.atleast_2d(X)
    Y = Y[:, None] if Y.ndim == 1 else Y
    n, p = Y.shape
    L, _ = jitchol(kernel.K(X) + noise_var * np.eye(n))
    alpha = cho_solve(L, Y)
    dK = 0.5 * (alpha @ alpha.T - p * cho_inverse(L))
    return kernel.grad_log_params(X, None, dK), float(np.trace(dK) * noise_var)


@dataclass
class ExactGP:
    """GP regression with type-II maximum likelihood hyperparameters."""
    kernel: object
    noise_var: float = 0.1
    fix_noise: bool = False

    def fit(self, X, Y, iters=200):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float)
        Y = Y[:, None] if Y.ndim == 1 else Y
        if X.shape[0] != Y.shape[0]:
            raise ArgumentError("inputs and outputs differ in length")
        self.X, self.Y = X, Y
        free = ~self.kernel.fixed_mask()

        def unpack(x):
            th = self.kernel.get_log_params()
            th[free] = x[:free.sum()]
            self.kernel.set_log_params(th)
            if not self.fix_noise:
                self.noise_var = float(np.exp(x[-1]))

        def obj(x):
            try:
                unpack(x)
                f = log_marginal(self.kernel, X, Y, self.noise_var)
                gk, gn = log_marginal_grad(self.kernel, X, Y, self.noise_var)
            except NumericalError:
                return np.inf, np.zeros_like(x)
            g = gk[free]
            if not self.fix_noise:
                g = np.append(g, gn)
            return -f, -g

        x0 = self.kernel.get_log_params()[free]
        if not self.fix_noise:
            x0 = np.append(x0, np.log(self.noise_var))
        if iters > 0 and x0.size:
            res = optimize.minimize(obj, x0, jac=True, method="L-BFGS-B",
                                    options={"maxiter": iters})
            unpack(res.x)
        self._cache()
        return self

    def _cache(self):
        n = self.X.shape[0]
        self._L, _ = jitchol(self.kernel.K(self.X) + self.noise_var * np.eye(n))
        self._alpha = cho_solve(self._L, self.Y)

    def predict(self, Xs, include_noise=False):
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        Ks = self.kernel.K(Xs, self.X)
        mean = Ks @ self._alpha
        V = cho_solve(self._L, Ks.T)
        var = self.kernel.Kdiag(Xs) - np.sum(Ks * V.T, 1)
        var = np.maximum(var, 0.0)
        if include_noise:
            var = var + self.noise_var
        return mean, var
