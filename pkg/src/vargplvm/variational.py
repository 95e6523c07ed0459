"""Variational posteriors over the latent inputs and their KL terms.

Two families are provided:

* ``FactorizedQ``: independent Gaussians per data point with diagonal
  covariances.  Used with the standard-normal prior and with the
  uncertain-input prior ``N(z_i, diag(prior_var))``.
* ``DynamicalQ``: one full n x n Gaussian per latent dimension, parametrised
  by ``mu_bar`` and ``lam`` so that ``S_j = (Kx^-1 + diag(lam_j))^-1`` and
  ``mu_j = Kx mu_bar_j``.

The dynamical quantities are always computed through
``B~_j = I + L^1/2 Kx L^1/2`` (eigenvalues >= 1), never through ``Kx^-1``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, StateError
from .linalg import cho_solve, jitchol, logdet_chol, solve_lower

__all__ = [
    "FactorizedQ", "DynamicalQ", "LatentPrior", "kl_factorized",
    "kl_uncertain", "kl_dynamical", "dynamical_transform",
    "temporal_covariance", "gaussian_kl", "marginal_variances",
]


@dataclass
class FactorizedQ:
    mean: np.ndarray
    var: np.ndarray
    fixed: np.ndarray = None        # per-entry clamp for both mean and var
    fixed_mean: np.ndarray = None   # per-entry clamp for the mean only

    def __post_init__(self):
        self.mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        self.var = np.atleast_2d(np.asarray(self.var, dtype=float))
        if self.mean.shape != self.var.shape:
            raise ArgumentError("mean and var shapes differ")
        if not np.all(self.var > 0):
            raise StateError("variational variances must be positive")
        if self.fixed is None:
            self.fixed = np.zeros(self.mean.shape, dtype=bool)
        else:
            self.fixed = np.asarray(self.fixed, dtype=bool)
            if self.fixed.shape != self.mean.shape:
                raise ArgumentError("fixed mask shape differs from mean")
        if self.fixed_mean is None:
            self.fixed_mean = np.zeros(self.mean.shape, dtype=bool)
        else:
            self.fixed_mean = np.broadcast_to(np.asarray(self.fixed_mean, dtype=bool),
                                              self.mean.shape).copy()

    @property
    def shape(self):
        return self.mean.shape

    def marginals(self, Kx=None):
        return self.mean, self.var


@dataclass
class DynamicalQ:
    mu_bar: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.mu_bar = np.atleast_2d(np.asarray(self.mu_bar, dtype=float))
        self.lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
        if self.mu_bar.shape != self.lam.shape:
            raise ArgumentError("mu_bar and lam shapes differ")
        if not np.all(self.lam > 0):
            raise StateError("lambda must be positive")

    @property
    def shape(self):
        return self.mu_bar.shape

    def marginals(self, Kx):
        """Means (n x q) and marginal variances (n x q) of q(X)."""
        M, S_list = dynamical_transform(self.mu_bar, self.lam, Kx)
        return M, marginal_variances(S_list, Kx)


@dataclass
class LatentPrior:
    """Prior over the latent inputs.

    ``kind`` is ``"standard"`` (N(0, I)), ``"temporal"`` (independent GPs
    over observed inputs ``t`` with kernel ``kernel``, block-diagonal across
    sequences starting at ``boundaries``) or ``"uncertain"`` (N(Z, diag(var))).
    """
    kind: str = "standard"
    kernel: object = None
    t: np.ndarray = None
    boundaries: list = field(default_factory=lambda: [0])
    Z: np.ndarray = None
    var: np.ndarray = None
    fix_var: bool = False
    fix_means: bool = False   # uncertain inputs: keep q(X) means at Z

    def __post_init__(self):
        if self.kind not in ("standard", "temporal", "uncertain"):
            raise ArgumentError(f"unknown prior kind {self.kind!r}")
        if self.kind == "temporal":
            if self.kernel is None or self.t is None:
                raise ArgumentError("temporal prior needs a kernel and inputs t")
            t = np.asarray(self.t, dtype=float)
            self.t = t[:, None] if t.ndim == 1 else t
            self.boundaries = sorted(set(int(b) for b in self.boundaries) | {0})
        if self.kind == "uncertain":
            if self.Z is None:
                raise ArgumentError("uncertain-input prior needs observed inputs Z")
            self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
            if self.var is None:
                self.var = np.ones(self.Z.shape[1])
            self.var = np.broadcast_to(np.asarray(self.var, dtype=float), (self.Z.shape[1],)).copy()
            if not np.all(self.var > 0):
                raise StateError("uncertain-input prior variances must be positive")

    def covariance(self):
        return temporal_covariance(self.kernel, self.t, self.boundaries)

    def block_mask(self, n=None):
        n = self.t.shape[0] if n is None else n
        return sequence_mask(self.boundaries, n)


VAR_FLOOR = 1e-12


def sequence_mask(boundaries, n):
    labels = np.searchsorted(np.asarray(sorted(boundaries)), np.arange(n), side="right")
    return labels[:, None] == labels[None, :]


def temporal_covariance(kernel, t, boundaries=(0,)):
    """Kx = k_x(t, t), zeroed between different sequences."""
    t = np.asarray(t, dtype=float)
    t = t[:, None] if t.ndim == 1 else t
    K = kernel.K(t)
    if len(boundaries) > 1:
        K = np.where(sequence_mask(boundaries, t.shape[0]), K, 0.0)
    return K


# -- KL terms ----------------------------------------------------------------

def gaussian_kl(m0, S0, m1, S1):
    """KL(N(m0, S0) || N(m1, S1)) for full covariances (reference formula)."""
    m0, m1 = np.ravel(m0), np.ravel(m1)
    L1, _ = jitchol(S1)
    L0, _ = jitchol(S0)
    k = m0.size
    tr = np.trace(cho_solve(L1, S0))
    d = m1 - m0
    return 0.5 * (tr + d @ cho_solve(L1, d) - k + logdet_chol(L1) - logdet_chol(L0))


def kl_factorized(q):
    """KL(q(X) || N(0, I)) for a factorised q."""
    M, S = q.mean, q.var
    return 0.5 * float(np.sum(M ** 2 + S - np.log(S))) - 0.5 * M.size


def kl_factorized_grads(q):
    return q.mean.copy(), 0.5 * (1.0 - 1.0 / q.var)


def kl_uncertain(q, Z, prior_var):
    """KL(q(X) || prod_i N(z_i, diag(prior_var)))."""
    M, S = q.mean, q.var
    v = np.asarray(prior_var, dtype=float)
    return 0.5 * float(np.sum((S + (M - Z) ** 2) / v - 1.0 - np.log(S) + np.log(v)))


def kl_uncertain_grads(q, Z, prior_var):
    """dKL/dM, dKL/dS and dKL/dlog(prior_var)."""
    M, S = q.mean, q.var
    v = np.asarray(prior_var, dtype=float)
    dM = (M - Z) / v
    dS = 0.5 * (1.0 / v - 1.0 / S)
    dlogv = 0.5 * np.sum(1.0 - (S + (M - Z) ** 2) / v, 0)
    return dM, dS, dlogv


def _dyn_factors(lam_j, Kx):
    """S_j, Bhat_j = L^1/2 B~^-1 L^1/2 = (Kx + L^-1)^-1 and log|B~_j|."""
    sl = np.sqrt(lam_j)
    Bt = np.eye(Kx.shape[0]) + sl[:, None] * Kx * sl[None, :]
    L, _ = jitchol(Bt)
    V = solve_lower(L, sl[:, None] * Kx)        # L^-1 L^1/2 Kx
    S = Kx - V.T @ V
    S = 0.5 * (S + S.T)
    Linv_sl = solve_lower(L, np.diag(sl))
    Bhat = Linv_sl.T @ Linv_sl
    return S, Bhat, logdet_chol(L)


def marginal_variances(S_list, Kx):
    """Diagonals of the S_j as columns, floored against round-off.

    ``Kx - V^T V`` can dip below zero by a few ulps when S_j is tiny
    relative to Kx.
    """
    floor = VAR_FLOOR * float(np.mean(np.diag(Kx)))
    return np.column_stack([np.maximum(np.diag(S), floor) for S in S_list])


def dynamical_transform(mu_bar, lam, Kx):
    """(M, [S_1..S_q]) with S_j = (Kx^-1 + diag(lam_j))^-1 and M = Kx mu_bar."""
    mu_bar = np.atleast_2d(mu_bar)
    lam = np.atleast_2d(lam)
    if np.any(lam <= 0):
        raise StateError("lambda must be positive")
    M = Kx @ mu_bar
    S_list = [_dyn_factors(lam[:, j], Kx)[0] for j in range(lam.shape[1])]
    return M, S_list


def kl_dynamical(q, Kx):
    """KL(q(X) || prod_j N(0, Kx)) via the B~ form (no Kx inverse)."""
    total = 0.0
    for j in range(q.mu_bar.shape[1]):
        _, Bhat, logdet_bt = _dyn_factors(q.lam[:, j], Kx)
        mb = q.mu_bar[:, j]
        total += 0.5 * (-np.sum(Bhat * Kx) + mb @ Kx @ mb + logdet_bt)
    return float(total)


def dynamical_backprop(mu_bar, lam, Kx, g_mu, g_s):
    """Chain rule for the dynamical parametrisation.

    ``g_mu`` and ``g_s`` are dF^/dmu and dF^/d diag(S) (both n x q).  Returns
    ``(kl, d mu_bar, d log lam, dF/dKx)`` for ``F = F^ - KL``.
    """
    n, q = mu_bar.shape
    d_mubar = np.zeros_like(mu_bar)
    d_loglam = np.zeros_like(lam)
    dKx = np.zeros_like(Kx)
    kl = 0.0
    eye = np.eye(n)
    for j in range(q):
        S, Bhat, logdet_bt = _dyn_factors(lam[:, j], Kx)
        mb = mu_bar[:, j]
        kl += 0.5 * (-np.sum(Bhat * Kx) + mb @ Kx @ mb + logdet_bt)
        d_mubar[:, j] = Kx @ (g_mu[:, j] - mb)
        d_loglam[:, j] = -((S * S) @ (g_s[:, j] + 0.5 * lam[:, j])) * lam[:, j]
        R = eye - Bhat @ Kx
        dKx += -0.5 * (Bhat @ Kx @ Bhat + np.outer(mb, mb))
        dKx += (R * g_s[:, j][None, :]) @ R.T
        dKx += 0.5 * (np.outer(g_mu[:, j], mb) + np.outer(mb, g_mu[:, j]))
    return float(kl), d_mubar, d_loglam, dKx
