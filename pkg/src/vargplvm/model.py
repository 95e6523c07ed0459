"""Trained-model state and its flat unconstrained parametrisation."""
import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, StateError
from .variational import DynamicalQ, FactorizedQ, LatentPrior

__all__ = ["Model", "KUU_JITTER"]

KUU_JITTER = 1e-6


@dataclass
class Model:
    """Everything the bound depends on.

    ``Z`` holds the inducing inputs (m x q).  ``y_mean`` is the column offset
    removed from the outputs before training; predictions add it back.
    """
    kernel: object
    Z: np.ndarray
    q: object
    beta: float
    output: object
    prior: LatentPrior = field(default_factory=LatentPrior)
    fix_beta: bool = False
    fix_inducing: bool = False
    y_mean: np.ndarray = None
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        if self.Z.shape[1] != self.q.shape[1]:
            raise ArgumentError("inducing inputs and q(X) disagree on latent dimensionality")
        if self.q.shape[0] != self.output.n:
            raise ArgumentError("q(X) and outputs disagree on the number of points")
        if not self.beta > 0:
            raise StateError("noise precision must be positive")
        dyn = isinstance(self.q, DynamicalQ)
        if dyn != (self.prior.kind == "temporal"):
            raise ArgumentError("dynamical q(X) requires a temporal prior and vice versa")
        if self.y_mean is None:
            self.y_mean = np.zeros(self.output.p)

    # -- shape info ----------------------------------------------------------
    @property
    def variant(self):
        return {"standard": "static", "temporal": "dynamical",
                "uncertain": "uncertain-input"}[self.prior.kind]

    @property
    def n(self):
        return self.q.shape[0]

    @property
    def latent_dim(self):
        return self.q.shape[1]

    @property
    def num_inducing(self):
        return self.Z.shape[0]

    @property
    def noise_var(self):
        return 1.0 / self.beta

    def kuu(self):
        """K(Z, Z) plus a jitter proportional to its mean diagonal."""
        K = self.kernel.K(self.Z)
        return K + KUU_JITTER * np.mean(np.diag(K)) * np.eye(K.shape[0])

    def kuu_cotangent(self, dKuu):
        """Map dF/dKuu to dF/dK(Z, Z), accounting for the relative jitter."""
        m = dKuu.shape[0]
        return dKuu + (KUU_JITTER / m) * np.trace(dKuu) * np.eye(m)

    # -- flat parametrisation ------------------------------------------------
    def schema(self):
        """List of (section, offset, shape) describing the flat vector."""
        n, q = self.q.shape
        if self.prior.kind == "temporal":
            secs = [("mu_bar", (n, q)), ("log_lambda", (n, q))]
        else:
            secs = [("mean", (n, q)), ("log_var", (n, q))]
        secs.append(("inducing", self.Z.shape))
        secs.append(("kernel_f", (self.kernel.num_params,)))
        if self.prior.kind == "temporal":
            secs.append(("kernel_x", (self.prior.kernel.num_params,)))
        if self.prior.kind == "uncertain":
            secs.append(("log_prior_var", (q,)))
        secs.append(("log_beta", (1,)))
        out, off = [], 0
        for name, shape in secs:
            out.append((name, off, tuple(shape)))
            off += int(np.prod(shape))
        return out

    @property
    def num_params(self):
        name, off, shape = self.schema()[-1]
        return off + int(np.prod(shape))

    def pack(self, sections):
        x = np.zeros(self.num_params)
        for name, off, shape in self.schema():
            size = int(np.prod(shape))
            x[off:off + size] = np.ravel(sections[name])
        return x

    def unpack(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.num_params,):
            raise ArgumentError(f"expected {self.num_params} parameters, got {x.shape}")
        return {name: x[off:off + int(np.prod(shape))].reshape(shape)
                for name, off, shape in self.schema()}

    def get_params(self):
        secs = {"inducing": self.Z, "kernel_f": self.kernel.get_log_params(),
                "log_beta": np.log(self.beta)}
        if self.prior.kind == "temporal":
            secs["mu_bar"] = self.q.mu_bar
            secs["log_lambda"] = np.log(self.q.lam)
            secs["kernel_x"] = self.prior.kernel.get_log_params()
        else:
            secs["mean"] = self.q.mean
            secs["log_var"] = np.log(self.q.var)
        if self.prior.kind == "uncertain":
            secs["log_prior_var"] = np.log(self.prior.var)
        return self.pack(secs)

    def set_params(self, x):
        """Write a flat vector back; fixed entries are left bit-identical."""
        secs = self.unpack(x)
        fixed = {k: v > 0 for k, v in self.unpack(self.fixed_mask().astype(float)).items()}

        def keep(name, old, new):
            return np.where(fixed[name], old, new)

        if self.prior.kind == "temporal":
            self.q.mu_bar = keep("mu_bar", self.q.mu_bar, secs["mu_bar"])
            self.q.lam = keep("log_lambda", self.q.lam, np.exp(secs["log_lambda"]))
            kx = self.prior.kernel
            kx.set_log_params(keep("kernel_x", kx.get_log_params(), secs["kernel_x"]))
        else:
            self.q.mean = keep("mean", self.q.mean, secs["mean"])
            self.q.var = keep("log_var", self.q.var, np.exp(secs["log_var"]))
        if self.prior.kind == "uncertain":
            self.prior.var = keep("log_prior_var", self.prior.var, np.exp(secs["log_prior_var"]))
        self.Z = keep("inducing", self.Z, secs["inducing"])
        self.kernel.set_log_params(keep("kernel_f", self.kernel.get_log_params(), secs["kernel_f"]))
        if not self.fix_beta:
            self.beta = float(np.exp(secs["log_beta"][0]))

    def fixed_mask(self):
        n, q = self.q.shape
        secs = {"inducing": np.full(self.Z.shape, self.fix_inducing),
                "kernel_f": self.kernel.fixed_mask(),
                "log_beta": np.array([self.fix_beta])}
        if self.prior.kind == "temporal":
            secs["mu_bar"] = np.zeros((n, q), dtype=bool)
            secs["log_lambda"] = np.zeros((n, q), dtype=bool)
            secs["kernel_x"] = self.prior.kernel.fixed_mask()
        else:
            secs["mean"] = self.q.fixed | self.q.fixed_mean
            secs["log_var"] = self.q.fixed
        if self.prior.kind == "uncertain":
            secs["log_prior_var"] = np.full(q, self.prior.fix_var)
        return self.pack(secs).astype(bool)

    def copy(self):
        return copy.deepcopy(self)
