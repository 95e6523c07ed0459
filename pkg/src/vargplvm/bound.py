"""The collapsed variational lower bound and its gradients.

Only ``Y Y^T`` enters the bound, so outputs are stored as an n x r factor
``R`` with ``R R^T = Y Y^T`` (``R = Y`` itself when p <= n, otherwise an
eigen-factor of the gram matrix).  With ``A = Kuu / beta + Psi2`` the summed
data term is

    F^ = -np/2 log 2pi + np/2 log beta + p/2 log|Kuu| - p/2 (m log beta + log|A|)
         - beta/2 tr(YY^T) + beta/2 tr(A^-1 Psi1^T YY^T Psi1)
         - p beta psi0 / 2 + p beta / 2 tr(Kuu^-1 Psi2)

Every solve is m x m, so the cost is dominated by forming the statistics
(O(n m^2)) and ``Psi1^T R``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericalError, StateError
from .linalg import cho_inverse, jitchol, logdet_chol, solve_lower
from .psi import psi_gradients, psi_statistics
from .variational import (
    DynamicalQ, dynamical_backprop, kl_dynamical, kl_factorized,
    kl_factorized_grads, kl_uncertain, kl_uncertain_grads,
)

__all__ = ["OutputData", "FhatTerms", "fhat", "fhat_terms", "lower_bound",
           "bound_gradients", "value_and_grad", "latent_marginals"]

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class OutputData:
    """Sufficient statistics of the outputs for the bound."""
    p: int
    factor: np.ndarray
    trace_yy: float
    Y: np.ndarray = None

    @classmethod
    def from_Y(cls, Y, keep_raw=True, use_gram=None):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if not np.all(np.isfinite(Y)):
            raise ArgumentError("outputs contain non-finite values")
        n, p = Y.shape
        if use_gram is None:
            use_gram = p > n
        if use_gram:
            out = cls.from_gram(Y @ Y.T, p)
        else:
            out = cls(p, Y.copy(), float(np.sum(Y * Y)))
        out.Y = Y.copy() if keep_raw else None
        return out

    @classmethod
    def from_gram(cls, G, p):
        G = np.asarray(G, dtype=float)
        G = 0.5 * (G + G.T)
        vals, vecs = np.linalg.eigh(G)
        keep = vals > vals.max(initial=0.0) * 1e-14
        factor = vecs[:, keep] * np.sqrt(vals[keep])
        return cls(int(p), factor, float(np.trace(G)))

    @property
    def n(self):
        return self.factor.shape[0]

    @property
    def gram(self):
        return self.factor @ self.factor.T

    def subset(self, rows):
        """Output data restricted to a subset of rows (needs raw Y)."""
        if self.Y is None:
            raise StateError("raw outputs were not retained")
        return OutputData.from_Y(self.Y[rows])


@dataclass
class FhatTerms:
    value: float
    dpsi0: float
    dpsi1: np.ndarray
    dpsi2: np.ndarray
    dKuu: np.ndarray
    dbeta: float


def fhat_terms(psi0, psi1, psi2, Kuu, output, beta, grads=True):
    """Value of F^ and its partial derivatives w.r.t. psi0, Psi1, Psi2, Kuu, beta."""
    if not beta > 0:
        raise StateError("noise precision must be positive")
    n, m = psi1.shape
    p = output.p
    R = output.factor
    Lk, _ = jitchol(Kuu)
    A = Kuu / beta + psi2
    La, _ = jitchol(0.5 * (A + A.T))
    P = psi1.T @ R
    V = solve_lower(La, P)
    quad = float(np.sum(V * V))
    Kinv = cho_inverse(Lk)
    tr_kinv_psi2 = float(np.sum(Kinv * psi2))
    logdet_a = logdet_chol(La)
    value = (-0.5 * n * p * LOG2PI + 0.5 * n * p * np.log(beta)
             + 0.5 * p * logdet_chol(Lk) - 0.5 * p * (m * np.log(beta) + logdet_a)
             - 0.5 * beta * output.trace_yy + 0.5 * beta * quad
             - 0.5 * p * beta * psi0 + 0.5 * p * beta * tr_kinv_psi2)
    if not np.isfinite(value):
        raise NumericalError("bound is not finite")
    if not grads:
        return FhatTerms(float(value), None, None, None, None, None)
    Ainv = cho_inverse(La)
    AiP = Ainv @ P
    AiCAi = AiP @ AiP.T
    dpsi0 = -0.5 * p * beta
    dpsi1 = beta * (R @ AiP.T)
    dpsi2 = 0.5 * (p * beta * Kinv - p * Ainv - beta * AiCAi)
    KiPsi2Ki = Kinv @ psi2 @ Kinv
    dKuu = 0.5 * (p * Kinv - (p / beta) * Ainv - AiCAi - beta * p * KiPsi2Ki)
    dbeta = (0.5 * n * p / beta - 0.5 * p * m / beta
             + 0.5 * p / beta ** 2 * np.sum(Ainv * Kuu)
             - 0.5 * output.trace_yy + 0.5 * quad
             + 0.5 / beta * np.sum(AiCAi * Kuu)
             - 0.5 * p * psi0 + 0.5 * p * tr_kinv_psi2)
    return FhatTerms(float(value), dpsi0, dpsi1, 0.5 * (dpsi2 + dpsi2.T),
                     0.5 * (dKuu + dKuu.T), float(dbeta))


def fhat(psi, Kuu, output, beta):
    """Data term of the bound summed over all output columns."""
    return fhat_terms(psi.psi0, psi.psi1, psi.psi2, Kuu, output, beta, grads=False).value


# -- model level ---------------------------------------------------------------

def latent_marginals(model):
    """Means and diagonal variances of q(X) (n x q each)."""
    if isinstance(model.q, DynamicalQ):
        return model.q.marginals(model.prior.covariance())
    return model.q.mean, model.q.var


def _kl(model):
    prior = model.prior
    if prior.kind == "temporal":
        return kl_dynamical(model.q, prior.covariance())
    if prior.kind == "uncertain":
        return kl_uncertain(model.q, prior.Z, prior.var)
    return kl_factorized(model.q)


def lower_bound(model):
    """F = F^ - KL(q(X) || p(X)) for the model's prior."""
    M, S = latent_marginals(model)
    psi = psi_statistics(model.kernel, M, S, model.Z)
    return fhat(psi, model.kuu(), model.output, model.beta) - _kl(model)


def value_and_grad(model):
    """Bound value and its gradient w.r.t. ``model.get_params()``.

    Fixed entries of the flat vector receive an exact zero.
    """
    kern, Z, prior = model.kernel, model.Z, model.prior
    dynamical = prior.kind == "temporal"
    if dynamical:
        Kx = prior.covariance()
        M, S = model.q.marginals(Kx)
    else:
        M, S = model.q.mean, model.q.var
    psi = psi_statistics(kern, M, S, Z)
    Kuu = model.kuu()
    t = fhat_terms(psi.psi0, psi.psi1, psi.psi2, Kuu, model.output, model.beta)
    pg = psi_gradients(kern, M, S, Z, t.dpsi0, t.dpsi1, t.dpsi2)
    dK = model.kuu_cotangent(t.dKuu)
    grads = {
        "inducing": pg.Z + kern.grad_X(Z, None, dK),
        "kernel_f": pg.params + kern.grad_log_params(Z, None, dK),
        "log_beta": np.array([t.dbeta * model.beta]),
    }
    if dynamical:
        kl, d_mb, d_ll, dKx = dynamical_backprop(model.q.mu_bar, model.q.lam, Kx, pg.mu, pg.S)
        if len(prior.boundaries) > 1:
            dKx = np.where(prior.block_mask(), dKx, 0.0)
        grads["mu_bar"] = d_mb
        grads["log_lambda"] = d_ll
        grads["kernel_x"] = prior.kernel.grad_log_params(prior.t, None, dKx)
    else:
        if prior.kind == "uncertain":
            kl = kl_uncertain(model.q, prior.Z, prior.var)
            dM, dS, dlogv = kl_uncertain_grads(model.q, prior.Z, prior.var)
            grads["log_prior_var"] = -dlogv
        else:
            kl = kl_factorized(model.q)
            dM, dS = kl_factorized_grads(model.q)
        grads["mean"] = pg.mu - dM
        grads["log_var"] = (pg.S - dS) * S
    g = model.pack(grads)
    g[model.fixed_mask()] = 0.0
    value = t.value - kl
    if not (np.isfinite(value) and np.all(np.isfinite(g))):
        raise NumericalError("non-finite bound or gradient",
                             snapshot={"value": value, "params": model.get_params()})
    return float(value), g


def bound_gradients(model):
    return value_and_grad(model)[1]
