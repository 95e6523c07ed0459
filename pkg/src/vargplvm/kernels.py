"""Covariance functions with log-space hyperparameter gradients.

Every kernel exposes its positive hyperparameters as a flat vector of
logarithms (``get_log_params`` / ``set_log_params``); all gradients returned
by this module are with respect to those logarithms.

``K(X)`` (no second argument) evaluates the kernel on a single point set and
is the only call in which ``White`` contributes.  ``K(X, X2)`` is a cross
covariance, for which ``White`` is zero unless ``X2 is X``.
"""
import copy

import numpy as np

from .errors import ArgumentError, CapabilityError, StateError

__all__ = [
    "Kernel", "RbfArd", "LinearArd", "Matern32", "PeriodicRbf", "White",
    "Bias", "Sum", "kernel_matrix", "kernel_param_grad", "parse_kernel",
    "kernel_from_dict",
]


DIRECT_DIFF_LIMIT = 2_000_000


def _as_2d(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ArgumentError("inputs must be a 2-D array of points")
    return X


class Kernel:
    """Common interface. Subclasses implement the leaf or composite logic."""

    family = "Kernel"

    def copy(self):
        return copy.deepcopy(self)

    @property
    def num_params(self):
        return len(self.param_names)

    def grad_log_params(self, X, X2, dL_dK):
        """Vector-Jacobian product: ``sum(dL_dK * dK/dlog(theta))`` per parameter."""
        return np.array([np.sum(dL_dK * M) for M in self.dK_dlog(X, X2)])

    def __add__(self, other):
        left = self.children if isinstance(self, Sum) else [self]
        right = other.children if isinstance(other, Sum) else [other]
        return Sum([k.copy() for k in left + right])

    def __repr__(self):
        if isinstance(self, Sum):
            return " + ".join(repr(c) for c in self.children)
        return f"{self.family}({self.to_dict()['params']})"


class _Leaf(Kernel):
    # ordered (name, length) of parameter groups, set by subclasses
    _group_names = ()

    def __init__(self, fixed=()):
        self.fixed = set(fixed)
        unknown = self.fixed - set(self._group_names)
        if unknown:
            raise ArgumentError(f"unknown fixed parameters {sorted(unknown)}")

    input_dim = None

    def _groups(self):
        return [(name, np.atleast_1d(getattr(self, name))) for name in self._group_names]

    @property
    def param_names(self):
        names = []
        for name, val in self._groups():
            if name == "weights":
                names.extend(f"weights[{j}]" for j in range(val.size))
            else:
                names.append(name)
        return names

    def get_log_params(self):
        if not self._groups():
            return np.zeros(0)
        return np.log(np.concatenate([v for _, v in self._groups()]))

    def set_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.num_params:
            raise ArgumentError("wrong number of kernel parameters")
        pos = 0
        for name, val in self._groups():
            t = theta[pos:pos + val.size]
            pos += val.size
            # unchanged entries keep their exact value (no exp/log round trip)
            new = np.where(t == np.log(val), val, np.exp(t))
            if name == "weights":
                setattr(self, name, new)
            else:
                setattr(self, name, float(new[0]))

    def fixed_mask(self):
        mask = []
        for name, val in self._groups():
            mask.extend([name in self.fixed] * val.size)
        return np.array(mask, dtype=bool)

    def _check(self, X, X2):
        X = _as_2d(X)
        X2 = X if X2 is None else _as_2d(X2)
        if self.input_dim is not None and (X.shape[1] != self.input_dim or X2.shape[1] != self.input_dim):
            raise ArgumentError(
                f"{self.family} expects {self.input_dim} input columns, got {X.shape[1]} and {X2.shape[1]}")
        if X.shape[1] != X2.shape[1]:
            raise ArgumentError("point sets have different dimensionality")
        for name, val in self._groups():
            if not np.all(val > 0):
                raise StateError(f"{self.family}.{name} must be strictly positive")
        return X, X2

    def to_dict(self):
        params = {}
        for name, val in self._groups():
            params[name] = val.tolist() if name == "weights" else float(val[0])
        return {"family": self.family, "params": params, "fixed": sorted(self.fixed), "children": []}

    def grad_X(self, X, X2, dL_dK):
        raise CapabilityError(f"input gradients not available for {self.family}")


class RbfArd(_Leaf):
    """Exponentiated quadratic with one inverse squared lengthscale per input."""

    family = "RbfArd"
    _group_names = ("variance", "weights")

    def __init__(self, input_dim, variance=1.0, weights=None, fixed=()):
        super().__init__(fixed)
        self.input_dim = int(input_dim)
        self.variance = float(variance)
        self.weights = np.ones(self.input_dim) if weights is None else np.array(weights, dtype=float).ravel()
        if self.weights.size != self.input_dim:
            raise ArgumentError("ARD weight vector length must equal input_dim")

    def _sqdist(self, X, X2):
        Xw = X * np.sqrt(self.weights)
        X2w = X2 * np.sqrt(self.weights)
        d = (np.sum(Xw ** 2, 1)[:, None] + np.sum(X2w ** 2, 1)[None, :] - 2.0 * Xw @ X2w.T)
        return np.maximum(d, 0.0)

    def K(self, X, X2=None):
        sym = X2 is None or X2 is X
        X, X2 = self._check(X, X2)
        if X.shape[0] * X2.shape[0] * X.shape[1] <= DIRECT_DIFF_LIMIT:
            # direct differences: no cancellation, and K(X) == K(X, X) bitwise
            r2 = np.einsum("ijk,k->ij", (X[:, None, :] - X2[None, :, :]) ** 2, self.weights)
        else:
            r2 = self._sqdist(X, X2)
            if sym:
                r2 = 0.5 * (r2 + r2.T)
                np.fill_diagonal(r2, 0.0)
        return self.variance * np.exp(-0.5 * r2)

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.full(X.shape[0], self.variance)

    def dK_dlog(self, X, X2=None):
        K = self.K(X, X2)
        X, X2 = self._check(X, X2)
        mats = [K]
        for j in range(self.input_dim):
            d2 = (X[:, j][:, None] - X2[:, j][None, :]) ** 2
            mats.append(K * (-0.5 * self.weights[j] * d2))
        return mats

    def grad_X(self, X, X2, dL_dK):
        sym = X2 is None
        K = self.K(X, X2)
        X, X2 = self._check(X, X2)
        G = dL_dK * K
        if sym:
            G = G + G.T
        # d k(x_i, x2_k) / d x_ij = -w_j (x_ij - x2_kj) k
        out = -(np.sum(G, 1)[:, None] * X - G @ X2) * self.weights
        return out


class LinearArd(_Leaf):
    """k(x, x') = sum_j w_j x_j x'_j."""

    family = "LinearArd"
    _group_names = ("weights",)

    def __init__(self, input_dim, weights=None, fixed=()):
        super().__init__(fixed)
        self.input_dim = int(input_dim)
        self.weights = np.ones(self.input_dim) if weights is None else np.array(weights, dtype=float).ravel()
        if self.weights.size != self.input_dim:
            raise ArgumentError("ARD weight vector length must equal input_dim")

    def K(self, X, X2=None):
        sym = X2 is None or X2 is X
        X, X2 = self._check(X, X2)
        K = (X * self.weights) @ X2.T
        return 0.5 * (K + K.T) if sym else K

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.sum(X ** 2 * self.weights, 1)

    def dK_dlog(self, X, X2=None):
        X, X2 = self._check(X, X2)
        return [self.weights[j] * np.outer(X[:, j], X2[:, j]) for j in range(self.input_dim)]

    def grad_X(self, X, X2, dL_dK):
        sym = X2 is None
        X, X2 = self._check(X, X2)
        G = dL_dK + dL_dK.T if sym else dL_dK
        return (G @ X2) * self.weights


class Matern32(_Leaf):
    """Matern 3/2 on the Euclidean distance between inputs."""

    family = "Matern32"
    _group_names = ("variance", "lengthscale")

    def __init__(self, variance=1.0, lengthscale=1.0, input_dim=None, fixed=()):
        super().__init__(fixed)
        self.variance = float(variance)
        self.lengthscale = float(lengthscale)
        self.input_dim = input_dim

    def _r(self, X, X2):
        d2 = np.sum((X[:, None, :] - X2[None, :, :]) ** 2, -1)
        return np.sqrt(d2) / self.lengthscale

    def K(self, X, X2=None):
        X, X2 = self._check(X, X2)
        s3r = np.sqrt(3.0) * self._r(X, X2)
        return self.variance * (1.0 + s3r) * np.exp(-s3r)

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.full(X.shape[0], self.variance)

    def dK_dlog(self, X, X2=None):
        X, X2 = self._check(X, X2)
        r = self._r(X, X2)
        e = np.exp(-np.sqrt(3.0) * r)
        K = self.variance * (1.0 + np.sqrt(3.0) * r) * e
        return [K, 3.0 * self.variance * r ** 2 * e]


class PeriodicRbf(_Leaf):
    """sigma^2 exp(-0.5 sin^2(2 pi (t - t') / T) / l), summed over input columns."""

    family = "PeriodicRbf"
    _group_names = ("variance", "lengthscale", "period")

    def __init__(self, variance=1.0, lengthscale=1.0, period=1.0, input_dim=None, fixed=()):
        super().__init__(fixed)
        self.variance = float(variance)
        self.lengthscale = float(lengthscale)
        self.period = float(period)
        self.input_dim = input_dim

    def _arg(self, X, X2):
        return 2.0 * np.pi * (X[:, None, :] - X2[None, :, :]) / self.period

    def K(self, X, X2=None):
        X, X2 = self._check(X, X2)
        u = np.sum(np.sin(self._arg(X, X2)) ** 2, -1)
        return self.variance * np.exp(-0.5 * u / self.lengthscale)

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.full(X.shape[0], self.variance)

    def dK_dlog(self, X, X2=None):
        X, X2 = self._check(X, X2)
        a = self._arg(X, X2)
        u = np.sum(np.sin(a) ** 2, -1)
        K = self.variance * np.exp(-0.5 * u / self.lengthscale)
        dl = K * 0.5 * u / self.lengthscale
        dT = K * np.sum(np.sin(2.0 * a) * a, -1) / (2.0 * self.lengthscale)
        return [K, dl, dT]


class White(_Leaf):
    """theta * delta(i, k): nonzero only on the diagonal of a single point set."""

    family = "White"
    _group_names = ("variance",)

    def __init__(self, variance=1e-2, input_dim=None, fixed=()):
        super().__init__(fixed)
        self.variance = float(variance)
        self.input_dim = input_dim

    def K(self, X, X2=None):
        same = X2 is None or X2 is X
        X, X2 = self._check(X, X2)
        if same:
            return self.variance * np.eye(X.shape[0])
        return np.zeros((X.shape[0], X2.shape[0]))

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.full(X.shape[0], self.variance)

    def dK_dlog(self, X, X2=None):
        return [self.K(X, X2)]

    def grad_X(self, X, X2, dL_dK):
        X, _ = self._check(X, X2)
        return np.zeros_like(X)


class Bias(_Leaf):
    """Constant covariance theta for every pair of points."""

    family = "Bias"
    _group_names = ("variance",)

    def __init__(self, variance=1e-2, input_dim=None, fixed=()):
        super().__init__(fixed)
        self.variance = float(variance)
        self.input_dim = input_dim

    def K(self, X, X2=None):
        X, X2 = self._check(X, X2)
        return np.full((X.shape[0], X2.shape[0]), self.variance)

    def Kdiag(self, X):
        X, _ = self._check(X, None)
        return np.full(X.shape[0], self.variance)

    def dK_dlog(self, X, X2=None):
        return [self.K(X, X2)]

    def grad_X(self, X, X2, dL_dK):
        X, _ = self._check(X, X2)
        return np.zeros_like(X)


class Sum(Kernel):
    """Elementwise sum of child kernels; parameters are concatenated in order."""

    family = "Sum"

    def __init__(self, children):
        children = list(children)
        if not children:
            raise ArgumentError("Sum kernel needs at least one child")
        self.children = children

    @property
    def input_dim(self):
        dims = {c.input_dim for c in self.children if c.input_dim is not None}
        if len(dims) > 1:
            raise StateError("children disagree on input dimensionality")
        return dims.pop() if dims else None

    @property
    def fixed(self):
        return {f"{i}.{name}" for i, c in enumerate(self.children) for name in c.fixed}

    @property
    def param_names(self):
        return [f"{i}.{name}" for i, c in enumerate(self.children) for name in c.param_names]

    def _slices(self):
        pos = 0
        for c in self.children:
            yield c, slice(pos, pos + c.num_params)
            pos += c.num_params

    def get_log_params(self):
        return np.concatenate([c.get_log_params() for c in self.children])

    def set_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.num_params:
            raise ArgumentError("wrong number of kernel parameters")
        for c, sl in self._slices():
            c.set_log_params(theta[sl])

    def fixed_mask(self):
        return np.concatenate([c.fixed_mask() for c in self.children])

    def K(self, X, X2=None):
        out = self.children[0].K(X, X2)
        for c in self.children[1:]:
            out = out + c.K(X, X2)
        return out

    def Kdiag(self, X):
        return sum(c.Kdiag(X) for c in self.children)

    def dK_dlog(self, X, X2=None):
        mats = []
        for c in self.children:
            mats.extend(c.dK_dlog(X, X2))
        return mats

    def grad_log_params(self, X, X2, dL_dK):
        return np.concatenate([c.grad_log_params(X, X2, dL_dK) for c in self.children])

    def grad_X(self, X, X2, dL_dK):
        return sum(c.grad_X(X, X2, dL_dK) for c in self.children)

    def to_dict(self):
        return {"family": "Sum", "params": {}, "fixed": [],
                "children": [c.to_dict() for c in self.children]}


_LEAVES = {cls.family: cls for cls in (RbfArd, LinearArd, Matern32, PeriodicRbf, White, Bias)}


def kernel_from_dict(d):
    """Inverse of ``Kernel.to_dict``."""
    family = d["family"]
    if family == "Sum":
        return Sum([kernel_from_dict(c) for c in d["children"]])
    if family not in _LEAVES:
        raise ArgumentError(f"unknown kernel family {family!r}")
    params = dict(d.get("params", {}))
    fixed = tuple(d.get("fixed", ()))
    if family in ("RbfArd", "LinearArd"):
        w = np.asarray(params["weights"], dtype=float)
        params["weights"] = w
        return _LEAVES[family](input_dim=w.size, fixed=fixed, **params)
    return _LEAVES[family](fixed=fixed, **params)


_ALIASES = {
    "rbfard": "RbfArd", "rbf": "RbfArd", "linard": "LinearArd", "linear": "LinearArd",
    "matern32": "Matern32", "periodic": "PeriodicRbf", "white": "White", "bias": "Bias",
}


def parse_kernel(expr, input_dim):
    """Build a kernel from a mini-expression such as ``"rbfard+white+bias"``."""
    parts = [p.strip().lower() for p in str(expr).split("+") if p.strip()]
    if not parts:
        raise ArgumentError("empty kernel expression")
    kerns = []
    for p in parts:
        if p not in _ALIASES:
            raise ArgumentError(f"unknown kernel term {p!r}; choose from {sorted(_ALIASES)}")
        fam = _ALIASES[p]
        if fam in ("RbfArd", "LinearArd"):
            kerns.append(_LEAVES[fam](input_dim))
        else:
            kerns.append(_LEAVES[fam]())
    return kerns[0] if len(kerns) == 1 else Sum(kerns)


def kernel_matrix(kernel, X1, X2=None):
    """Covariance between two point sets (``X2=None`` means the same set)."""
    return kernel.K(X1, X2)


def kernel_param_grad(kernel, X1, X2, param_id):
    """Elementwise derivative of the kernel matrix w.r.t. one log-parameter.

    ``param_id`` is a name from ``kernel.param_names`` (e.g. ``"weights[0]"``
    or ``"1.variance"`` inside a sum) or an integer index.
    """
    names = kernel.param_names
    if isinstance(param_id, (int, np.integer)):
        idx = int(param_id)
        if not 0 <= idx < len(names):
            raise ArgumentError(f"parameter index {idx} out of range")
    else:
        if param_id not in names:
            raise ArgumentError(f"unknown parameter {param_id!r}; have {names}")
        idx = names.index(param_id)
    if kernel.fixed_mask()[idx]:
        raise ArgumentError(f"parameter {names[idx]!r} is fixed")
    return kernel.dK_dlog(X1, X2)[idx]
