"""Test-time inference and predictions.

Latent inference for new outputs optimises the bound of the augmented data
set over q(X*) with the trained kernel, inducing inputs and noise held.  In
the factorised variants the training statistics are computed once and
reused; in the dynamical variant the temporal prior couples training and
test points, so the whole reparametrised q(X, X*) is re-optimised.
"""
from dataclasses import dataclass

import numpy as np

from .bound import OutputData, fhat_terms, latent_marginals, lower_bound
from .errors import ArgumentError, CapabilityError, NumericalError, StateError
from .linalg import cho_inverse, cho_solve, jitchol
from .psi import psi_gradients, psi_statistics
from .training import LbfgsOptimizer
from .variational import (
    FactorizedQ, dynamical_backprop, dynamical_transform, kl_uncertain,
    kl_uncertain_grads, marginal_variances, temporal_covariance,
)

__all__ = ["PredictiveMoments", "TestQ", "InferConfig", "predict_moments",
           "infer_latent", "log_density", "reconstruct", "forecast",
           "autoregress_dataset", "iterative_predict", "nearest_neighbours"]


@dataclass
class PredictiveMoments:
    mean: np.ndarray          # n* x |columns|
    var: np.ndarray           # per-point, per-column variances
    columns: np.ndarray
    noise_included: bool = False


@dataclass
class TestQ:
    mean: np.ndarray
    var: np.ndarray
    bound: float = None
    trace: list = None
    joint: object = None      # (mu_bar, lam) of the coupled q(X, X*) when dynamical


@dataclass
class InferConfig:
    iters: int = 300
    init: str = "nn"                  # "nn" or "prior"
    factorised_shortcut: bool = False  # dynamical: hold the training part of q fixed
    new_sequence: bool = False         # dynamical: test points start their own sequence
    optimiser: object = None


# -- predictive moments --------------------------------------------------------

def _columns(model, columns):
    p = model.output.p
    if columns is None:
        return np.arange(p)
    cols = np.asarray(columns, dtype=int).ravel()
    if cols.size and (cols.min() < 0 or cols.max() >= p):
        raise ArgumentError("column index out of range")
    return cols


def _raw_outputs(model):
    if model.output.Y is None:
        raise StateError("model was built without raw outputs; predictions need them")
    return model.output.Y


def _posterior_cache(model, cols):
    M, S = latent_marginals(model)
    psi = psi_statistics(model.kernel, M, S, model.Z)
    Kuu = model.kuu()
    Lk, _ = jitchol(Kuu)
    A = Kuu / model.beta + psi.psi2
    La, _ = jitchol(0.5 * (A + A.T))
    Y = _raw_outputs(model)[:, cols]
    B = cho_solve(La, psi.psi1.T @ Y)
    C = cho_inverse(Lk) - cho_inverse(La) / model.beta
    return B, C


def predict_moments(model, mu, S, columns=None, include_noise=False):
    """Predictive mean and variance of outputs for Gaussian inputs N(mu, diag S)."""
    cols = _columns(model, columns)
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    B, C = _posterior_cache(model, cols)
    ps = psi_statistics(model.kernel, mu, S, model.Z, per_point=True)
    f = ps.psi1 @ B
    quad = np.einsum("kj,ikl,lj->ij", B, ps.psi2_i, B)
    var = quad - f ** 2 + ps.psi0_i[:, None] - np.einsum("kl,ikl->i", C, ps.psi2_i)[:, None]
    var = np.maximum(var, 0.0)
    if include_noise:
        var = var + model.noise_var
    return PredictiveMoments(f + model.y_mean[cols], var, cols, include_noise)


# -- latent inference ----------------------------------------------------------

def nearest_neighbours(Y_train, Y_query):
    """Index of the nearest training row, Euclidean on standardised columns."""
    sd = Y_train.std(0)
    sd[sd < 1e-12] = 1.0
    A = Y_train / sd
    Bq = Y_query / sd
    d = (np.sum(Bq ** 2, 1)[:, None] - 2.0 * Bq @ A.T + np.sum(A ** 2, 1)[None, :])
    return np.argmin(d, 1)


def _test_prior(model, n_star):
    q = model.latent_dim
    if model.prior.kind == "uncertain":
        mean = np.broadcast_to(model.prior.Z.mean(0), (n_star, q))
        return mean.copy(), model.prior.var.copy()
    return np.zeros((n_star, q)), np.ones(q)


def _run(fun, x0, iters, optimiser):
    opt = optimiser or LbfgsOptimizer()
    f0, _ = fun(x0)
    if not np.isfinite(f0):
        raise NumericalError("test bound is not finite at the initial point")
    x, values = opt.minimize(fun, x0, iters)
    f1, _ = fun(x)
    if not f1 <= f0:
        x, f1 = x0, f0
    return x, -f1, [-v for v in values]


def _infer_factorized(model, Ystar, cols, cfg, init_mean, init_var, fixed):
    n_star = Ystar.shape[0]
    q = model.latent_dim
    kern, Z = model.kernel, model.Z
    M, S = model.q.mean, model.q.var
    psi_tr = psi_statistics(kern, M, S, Z)
    Ytr = _raw_outputs(model)[:, cols]
    Yc = Ystar - model.y_mean[cols]
    factor = np.vstack([Ytr, Yc])
    out = OutputData(len(cols), factor, float(np.sum(factor ** 2)))
    Kuu = model.kuu()
    pm, pv = _test_prior(model, n_star)

    if init_mean is None:
        if cfg.init == "nn" and len(cols):
            nn = nearest_neighbours(Ytr, Yc)
            init_mean, init_var = M[nn].copy(), S[nn].copy()
        else:
            init_mean, init_var = pm.copy(), np.broadcast_to(pv, (n_star, q)).copy()
    mean0 = np.asarray(init_mean, dtype=float).copy()
    var0 = np.asarray(init_var, dtype=float).copy()
    fixed = np.zeros((n_star, q), bool) if fixed is None else np.asarray(fixed, bool)
    free = np.concatenate([~fixed.ravel(), ~fixed.ravel()])
    base = np.concatenate([mean0.ravel(), np.log(var0).ravel()])

    def evaluate(x):
        mu = x[:n_star * q].reshape(n_star, q)
        Sv = np.exp(x[n_star * q:]).reshape(n_star, q)
        ps = psi_statistics(kern, mu, Sv, Z)
        t = fhat_terms(psi_tr.psi0 + ps.psi0, np.vstack([psi_tr.psi1, ps.psi1]),
                       psi_tr.psi2 + ps.psi2, Kuu, out, model.beta)
        g = psi_gradients(kern, mu, Sv, Z, t.dpsi0, t.dpsi1[M.shape[0]:], t.dpsi2)
        qs = FactorizedQ(mu, Sv)
        kl = kl_uncertain(qs, pm, pv)
        dM, dS, _ = kl_uncertain_grads(qs, pm, pv)
        grad = np.concatenate([(g.mu - dM).ravel(), ((g.S - dS) * Sv).ravel()])
        return t.value - kl, grad

    def fun(xf):
        x = base.copy()
        x[free] = xf
        try:
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                f, g = evaluate(x)
        except (NumericalError, StateError):
            return np.inf, np.zeros_like(xf)
        return -f, -g[free]

    xf, value, trace = _run(fun, base[free], cfg.iters, cfg.optimiser)
    x = base.copy()
    x[free] = xf
    mu = x[:n_star * q].reshape(n_star, q)
    Sv = np.exp(x[n_star * q:]).reshape(n_star, q)
    mu[fixed] = mean0[fixed]
    Sv[fixed] = var0[fixed]
    return TestQ(mu, Sv, value, trace)


def _dyn_groups(model, Ystar, cols, n_star):
    """Output groups of the coupled bound: observed columns over all rows,
    the remaining columns over training rows only."""
    Y = _raw_outputs(model)
    p = model.output.p
    u = np.setdiff1d(np.arange(p), cols)
    Yo = np.vstack([Y[:, cols], Ystar - model.y_mean[cols]])
    groups = [(slice(None), OutputData(len(cols), Yo, float(np.sum(Yo ** 2))))]
    if u.size:
        Yu = Y[:, u]
        groups.append((slice(0, model.n), OutputData(len(u), Yu, float(np.sum(Yu ** 2)))))
    return groups


def _infer_dynamical(model, Ystar, cols, t_star, cfg):
    if t_star is None:
        raise ArgumentError("dynamical models need timestamps for test points")
    prior = model.prior
    n, q = model.q.shape
    t_star = np.asarray(t_star, dtype=float).reshape(-1, prior.t.shape[1])
    n_star = t_star.shape[0]
    if n_star != Ystar.shape[0]:
        raise ArgumentError("timestamps and test rows differ in length")
    t_all = np.vstack([prior.t, t_star])
    bounds = list(prior.boundaries) + ([n] if cfg.new_sequence else [])
    Kx = temporal_covariance(prior.kernel, t_all, bounds)
    kern, Z, beta = model.kernel, model.Z, model.beta
    Kuu = model.kuu()
    groups = _dyn_groups(model, Ystar, cols, n_star)

    M_tr, S_tr = latent_marginals(model)
    Yc = Ystar - model.y_mean[cols]
    if cfg.init == "nn" and len(cols):
        nn = nearest_neighbours(_raw_outputs(model)[:, cols], Yc)
    else:
        nn = np.full(n_star, n - 1)
    M0 = np.vstack([M_tr, M_tr[nn]])
    L, _ = jitchol(Kx)
    mb0 = cho_solve(L, M0)
    lam0 = np.vstack([model.q.lam, model.q.lam[nn]])
    N = n + n_star
    free = np.ones((N, q), bool)
    if cfg.factorised_shortcut:
        free[:n] = False
        mb0[:n] = model.q.mu_bar
        mb0[n:] = 0.0   # test latents start at the forecast mean
    free = np.concatenate([free.ravel(), free.ravel()])
    base = np.concatenate([mb0.ravel(), np.log(lam0).ravel()])

    def evaluate(x):
        mb = x[:N * q].reshape(N, q)
        lam = np.exp(x[N * q:]).reshape(N, q)
        M, S_list = dynamical_transform(mb, lam, Kx)
        Sv = marginal_variances(S_list, Kx)
        value = 0.0
        g_mu = np.zeros((N, q))
        g_s = np.zeros((N, q))
        for rows, out in groups:
            mu, sv = M[rows], Sv[rows]
            ps = psi_statistics(kern, mu, sv, Z)
            t = fhat_terms(ps.psi0, ps.psi1, ps.psi2, Kuu, out, beta)
            g = psi_gradients(kern, mu, sv, Z, t.dpsi0, t.dpsi1, t.dpsi2)
            value += t.value
            g_mu[rows] += g.mu
            g_s[rows] += g.S
        kl, d_mb, d_ll, _ = dynamical_backprop(mb, lam, Kx, g_mu, g_s)
        return value - kl, np.concatenate([d_mb.ravel(), d_ll.ravel()])

    def fun(xf):
        x = base.copy()
        x[free] = xf
        try:
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                f, g = evaluate(x)
        except (NumericalError, StateError):
            return np.inf, np.zeros_like(xf)
        return -f, -g[free]

    xf, value, trace = _run(fun, base[free], cfg.iters, cfg.optimiser)
    x = base.copy()
    x[free] = xf
    mb = x[:N * q].reshape(N, q)
    lam = np.exp(x[N * q:]).reshape(N, q)
    M, S_list = dynamical_transform(mb, lam, Kx)
    Sv = marginal_variances(S_list, Kx)
    return TestQ(M[n:], Sv[n:], value, trace, joint=(mb, lam))


def infer_latent(model, Ystar, columns=None, config=None, t_star=None,
                 init_mean=None, init_var=None, fixed=None):
    """Fit q(X*) for test outputs observed in ``columns``.

    ``fixed`` (n* x q bool) clamps entries of q(X*) at ``init_mean`` /
    ``init_var``; only the factorised variants support clamping.
    """
    cfg = config or InferConfig()
    cols = _columns(model, columns)
    Ystar = np.atleast_2d(np.asarray(Ystar, dtype=float))
    if Ystar.shape[1] != cols.size:
        raise ArgumentError("test outputs do not match the observed column set")
    if model.prior.kind == "temporal":
        if fixed is not None or init_mean is not None:
            raise CapabilityError("clamped test inference is only available for factorised models")
        return _infer_dynamical(model, Ystar, cols, t_star, cfg)
    return _infer_factorized(model, Ystar, cols, cfg, init_mean, init_var, fixed)


# -- public predictions --------------------------------------------------------

def log_density(Ystar, model, config=None, t_star=None):
    """Approximate log p(Y* | Y) as a difference of two bounds."""
    Ystar = np.atleast_2d(np.asarray(Ystar, dtype=float))
    if Ystar.size == 0:
        return 0.0
    if Ystar.shape[1] != model.output.p:
        raise ArgumentError(f"expected {model.output.p} columns")
    tq = infer_latent(model, Ystar, None, config, t_star=t_star)
    if model.prior.kind == "temporal":
        return float(tq.bound - lower_bound(model))
    M, S = model.q.mean, model.q.var
    psi = psi_statistics(model.kernel, M, S, model.Z)
    f_train = fhat_terms(psi.psi0, psi.psi1, psi.psi2, model.kuu(), model.output,
                         model.beta, grads=False).value
    return float(tq.bound - f_train)


def reconstruct(Ystar_obs, observed, model, config=None, t_star=None, include_noise=False):
    """Predict the unobserved output columns from the observed ones.

    Returns ``(moments, test_q)``.
    """
    p = model.output.p
    o = _columns(model, observed)
    if o.size == 0:
        raise ArgumentError("at least one column must be observed")
    u = np.setdiff1d(np.arange(p), o)
    if u.size == 0:
        raise ArgumentError("all columns observed; use log_density instead")
    tq = infer_latent(model, Ystar_obs, o, config, t_star=t_star)
    return predict_moments(model, tq.mean, tq.var, u, include_noise), tq


def forecast(t_star, model, include_noise=False, sequence=-1):
    """Latent and output predictions at new timestamps (no optimisation).

    ``sequence`` selects which training sequence the new timestamps extend.
    """
    prior = model.prior
    if prior.kind != "temporal":
        raise CapabilityError("forecasting needs a model with a temporal prior")
    t_star = np.asarray(t_star, dtype=float).reshape(-1, prior.t.shape[1])
    n, q = model.q.shape
    Kx = prior.covariance()
    Ksn = prior.kernel.K(t_star, prior.t)
    starts = list(prior.boundaries) + [n]
    s = range(len(starts) - 1)[sequence]
    mask = np.zeros(n, bool)
    mask[starts[s]:starts[s + 1]] = True
    Ksn = Ksn * mask[None, :]
    kss = prior.kernel.Kdiag(t_star)
    mean = Ksn @ model.q.mu_bar
    var = np.empty_like(mean)
    for j in range(q):
        lam = model.q.lam[:, j]
        Lb, _ = jitchol(Kx + np.diag(1.0 / lam))
        V = cho_solve(Lb, Ksn.T)
        var[:, j] = np.maximum(kss - np.sum(Ksn * V.T, 1), 0.0)
    tq = TestQ(mean, var)
    return tq, predict_moments(model, mean, var, None, include_noise)


def autoregress_dataset(Y, tau):
    """Sliding windows: inputs are tau consecutive rows, target is the next row."""
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    n, p = Y.shape
    tau = int(tau)
    if tau < 1 or n <= tau:
        raise ArgumentError("need n > tau >= 1")
    Zhat = np.stack([Y[i:i + tau].ravel() for i in range(n - tau)])
    return Zhat, Y[tau:].copy()


def iterative_predict(model, start, steps, start_var=None, propagate=True):
    """k-step-ahead prediction feeding each output back as an input.

    ``start`` is the first window (tau * p values).  With ``propagate`` the
    predicted variances (noise included) become the input variances of the
    next windows; otherwise inputs are treated as exact.
    """
    if model.prior.kind != "uncertain":
        raise CapabilityError("iterative prediction needs an uncertain-input model")
    steps = int(steps)
    if steps < 1:
        raise ArgumentError("steps must be >= 1")
    p = model.output.p
    w_mean = np.asarray(start, dtype=float).ravel().copy()
    if w_mean.size != model.latent_dim:
        raise ArgumentError("start window has the wrong length")
    w_var = np.zeros_like(w_mean) if start_var is None else np.asarray(start_var, float).ravel().copy()
    means, variances = [], []
    for _ in range(steps):
        S = w_var if propagate else np.zeros_like(w_var)
        mom = predict_moments(model, w_mean[None], S[None], None, include_noise=True)
        means.append(mom.mean[0])
        variances.append(mom.var[0])
        w_mean = np.concatenate([w_mean[p:], mom.mean[0]])
        w_var = np.concatenate([w_var[p:], mom.var[0]])
    return np.array(means), np.array(variances)
