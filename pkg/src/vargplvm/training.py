"""Initialisation, optimisation and ARD inspection."""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .bound import OutputData, value_and_grad
from .errors import ArgumentError, CapabilityError, NumericalError, StateError
from .kernels import LinearArd, RbfArd, Sum, parse_kernel
from .linalg import cho_solve, jitchol
from .model import Model
from .variational import DynamicalQ, FactorizedQ, LatentPrior

__all__ = ["TrainConfig", "LbfgsOptimizer", "initialize", "train", "fit",
           "ard_report", "ArdReport", "pca_scores", "default_temporal_kernel"]


@dataclass
class TrainConfig:
    latent_dim: int = 2
    num_inducing: int = 20
    fixed_beta_iters: int = 100
    main_iters: object = 1000          # int or list of stage lengths
    init_variance: float = 0.5
    seed: int = 0
    kernel: str = "rbfard+bias"
    fix_inducing: bool = False
    ftol: float = 1e-12
    gtol: float = 1e-6

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ArgumentError("latent_dim must be >= 1")
        if self.num_inducing < 1:
            raise ArgumentError("num_inducing must be >= 1")
        if self.fixed_beta_iters < 0 or any(i < 0 for i in self.stages):
            raise ArgumentError("iteration counts must be non-negative")
        if not self.init_variance > 0:
            raise ArgumentError("init_variance must be positive")

    @property
    def stages(self):
        it = self.main_iters
        return [int(i) for i in it] if isinstance(it, (list, tuple)) else [int(it)]


@dataclass
class LbfgsOptimizer:
    """Quasi-Newton minimiser (scipy L-BFGS-B) with a per-iteration trace.

    ``minimize(fun, x0, maxiter, callback=None)`` takes ``fun(x) -> (value,
    grad)`` to be minimised and returns ``(x_best, values)`` where ``values``
    holds the objective at each accepted iterate.  ``callback(x, value)`` is
    called once per accepted iterate.
    """
    ftol: float = 1e-12
    gtol: float = 1e-6
    maxls: int = 40

    def minimize(self, fun, x0, maxiter, callback=None):
        values = []
        if maxiter <= 0 or x0.size == 0:
            return x0.copy(), values

        def cb(intermediate_result):
            values.append(float(intermediate_result.fun))
            if callback is not None:
                callback(intermediate_result.x, values[-1])

        res = optimize.minimize(
            fun, x0, jac=True, method="L-BFGS-B", callback=cb,
            options={"maxiter": int(maxiter), "ftol": self.ftol,
                     "gtol": self.gtol, "maxls": self.maxls})
        return res.x, values


INIT_SMOOTH = 1e-6   # relative ridge when solving Kx mu_bar = M at initialisation


# -- initialisation ------------------------------------------------------------

def pca_scores(Y, q):
    """First q principal-component scores of centred Y, unit variance per column."""
    Yc = Y - Y.mean(0)
    n, p = Yc.shape
    if q > min(n, p):
        raise ArgumentError(f"latent_dim={q} exceeds min(n, p)={min(n, p)}")
    U, s, _ = np.linalg.svd(Yc, full_matrices=False)
    X = U[:, :q] * s[:q]
    sd = X.std(0)
    sd[sd < 1e-12] = 1.0
    return X / sd


def default_temporal_kernel(t):
    t = np.asarray(t, dtype=float).reshape(len(t), -1)
    span = float(np.ptp(t[:, 0])) or 1.0
    ell = span / 10.0
    return RbfArd(1, 1.0, [1.0 / ell ** 2])


def _ard_leaf(kernel):
    if isinstance(kernel, (RbfArd, LinearArd)):
        return kernel
    if isinstance(kernel, Sum):
        for c in kernel.children:
            if isinstance(c, (RbfArd, LinearArd)):
                return c
    return None


def initialize(Y, config, prior=None, kernel=None):
    """Build an untrained model from data, a config and an optional prior."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, p = Y.shape
    q = config.latent_dim
    if n < 2:
        raise ArgumentError("need at least two data points")
    prior = LatentPrior() if prior is None else prior
    rng = np.random.default_rng(config.seed)
    y_mean = Y.mean(0)
    Yc = Y - y_mean
    if prior.kind == "uncertain":
        if prior.Z.shape != (n, q):
            raise ArgumentError("observed inputs must be n x latent_dim")
        M = prior.Z.copy()
    else:
        M = pca_scores(Yc, q)
    var_y = float(np.var(Yc)) or 1.0
    if kernel is None:
        kernel = parse_kernel(config.kernel, q)
    kernel = kernel.copy()
    leaf = _ard_leaf(kernel)
    if leaf is not None:
        if leaf.input_dim != q:
            raise ArgumentError("kernel dimensionality differs from latent_dim")
        if "weights" not in leaf.fixed:
            leaf.weights = (1.0 / q) * (1.0 + 0.01 * rng.standard_normal(q))
        if isinstance(leaf, RbfArd) and "variance" not in leaf.fixed:
            leaf.variance = var_y
    m = config.num_inducing
    if m > n:
        warnings.warn("more inducing points than data points")
        idx = rng.choice(n, m, replace=True)
        Z = M[idx] + 0.01 * rng.standard_normal((m, q))
    else:
        Z = M[rng.choice(n, m, replace=False)].copy()
    S0 = np.full((n, q), float(config.init_variance))
    if prior.kind == "temporal":
        if prior.t.shape[0] != n:
            raise ArgumentError("timestamps and outputs differ in length")
        Kx = prior.covariance()
        L, _ = jitchol(Kx + INIT_SMOOTH * np.mean(np.diag(Kx)) * np.eye(n))
        qx = DynamicalQ(cho_solve(L, M), 1.0 / S0)
    else:
        qx = FactorizedQ(M, S0, fixed_mean=prior.kind == "uncertain" and prior.fix_means)
    return Model(kernel, Z, qx, 100.0 / var_y, OutputData.from_Y(Yc), prior=prior,
                 fix_inducing=config.fix_inducing, y_mean=y_mean)


# -- optimisation --------------------------------------------------------------

def _run_stage(model, iters, optimiser, it0):
    free = ~model.fixed_mask()
    base = model.get_params()

    def fun(xf):
        x = base.copy()
        x[free] = xf
        try:
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                model.set_params(x)
                f, g = value_and_grad(model)
        except (NumericalError, StateError):
            return np.inf, np.zeros_like(xf)
        return -f, -g[free]

    f0, _ = fun(base[free])
    if not np.isfinite(f0):
        model.set_params(base)
        raise NumericalError("bound is not finite at the starting point",
                             snapshot={"params": base})
    rows = []
    beta_idx = model.schema()[-1][1]
    held_beta = model.beta if model.fix_beta else None
    full = base.copy()

    def record(xf, value):
        full[free] = xf
        beta = held_beta if held_beta is not None else float(np.exp(full[beta_idx]))
        rows.append((it0 + len(rows) + 1, -value, beta))

    x_best, _ = optimiser.minimize(fun, base[free], iters, callback=record)
    x = base.copy()
    x[free] = x_best
    f_end, _ = fun(x_best)
    if not f_end <= f0:
        x = base   # never hand back a worse model than we started with
        f_end = f0
    model.set_params(x)
    return -f0, -f_end, rows


def train(model, config, optimiser=None):
    """Two-stage fit: first with the noise precision held, then jointly.

    Returns ``(model, trace)`` where trace rows are (iteration, bound, beta).
    The model is updated in place.
    """
    optimiser = optimiser or LbfgsOptimizer(ftol=config.ftol, gtol=config.gtol)
    trace = []
    stages = []
    if config.fixed_beta_iters > 0:
        stages.append((config.fixed_beta_iters, True))
    stages += [(it, False) for it in config.stages if it > 0]
    it = 0
    for iters, hold_beta in stages:
        was_fixed = model.fix_beta
        model.fix_beta = was_fixed or hold_beta
        try:
            f0, f1, rows = _run_stage(model, iters, optimiser, it)
        finally:
            model.fix_beta = was_fixed
        if not trace:
            trace.append((0, f0, model.beta))
        trace.extend(rows)
        it += len(rows)
    model.trace = list(model.trace) + trace
    return model, trace


def fit(Y, config, prior=None, kernel=None, optimiser=None):
    model = initialize(Y, config, prior=prior, kernel=kernel)
    train(model, config, optimiser)
    return model


# -- ARD -----------------------------------------------------------------------

@dataclass
class ArdReport:
    entries: list = field(default_factory=list)   # (dimension, weight, normalised)
    threshold: float = 0.01

    @property
    def effective_dim(self):
        return sum(1 for _, _, r in self.entries if r >= self.threshold)

    @property
    def dominant(self):
        return [d for d, _, _ in self.entries]

    def to_text(self):
        lines = ["dimension,weight,normalised"]
        lines += [f"{d},{w:.10g},{r:.10g}" for d, w, r in self.entries]
        lines.append(f"# effective dimensionality (threshold {self.threshold:g}): {self.effective_dim}")
        return "\n".join(lines) + "\n"


def ard_report(model_or_kernel, threshold=0.01):
    """ARD weights sorted descending, normalised by the largest."""
    kernel = getattr(model_or_kernel, "kernel", model_or_kernel)
    leaf = _ard_leaf(kernel)
    if leaf is None:
        raise CapabilityError("kernel has no ARD weights")
    w = np.asarray(leaf.weights, dtype=float)
    order = np.argsort(-w, kind="stable")
    top = w[order[0]]
    return ArdReport([(int(j), float(w[j]), float(w[j] / top)) for j in order], threshold)
