"""Kernel expectations under diagonal Gaussian marginals.

For marginals ``q(x_i) = N(mu_i, diag(S_i))`` and inducing inputs ``Z`` the
statistics are

    psi0 = sum_i E[k(x_i, x_i)]
    Psi1[i, k] = E[k(x_i, z_k)]
    Psi2 = sum_i E[k(z, x_i) k(x_i, z)^T]

Closed forms exist for ``RbfArd`` and ``LinearArd``, optionally summed with
``Bias`` and ``White`` terms.  ``psi_quadrature_oracle`` evaluates the same
integrals by tensor-product Gauss-Hermite quadrature for any kernel and is
used as an independent check.

Summation over data points always runs in index order, so results are
bitwise reproducible for identical inputs.
"""
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ArgumentError, CapabilityError
from .kernels import Bias, LinearArd, RbfArd, Sum, White

__all__ = ["PsiStats", "PsiGradients", "psi_statistics", "psi_gradients",
           "psi_quadrature_oracle", "analytic_supported"]

ROW_BLOCK = 256   # rows per block for large n


@dataclass
class PsiStats:
    psi0: float
    psi1: np.ndarray
    psi2: np.ndarray
    psi0_i: np.ndarray = None   # (n,) per-point contributions
    psi2_i: np.ndarray = None   # (n, m, m) per-point contributions


@dataclass
class PsiGradients:
    """Gradients of a scalar L(psi0, Psi1, Psi2) pulled back to the inputs.

    ``params`` is w.r.t. the kernel's log-parameters, in the kernel's flat order.
    """
    mu: np.ndarray
    S: np.ndarray
    Z: np.ndarray
    params: np.ndarray


def _decompose(kernel):
    """Split a kernel into (main, bias, white) leaves plus their flat offsets."""
    leaves = kernel.children if isinstance(kernel, Sum) else [kernel]
    parts = {"main": None, "bias": None, "white": None}
    offsets = {}
    pos = 0
    for leaf in leaves:
        if isinstance(leaf, (RbfArd, LinearArd)):
            key = "main"
        elif isinstance(leaf, Bias):
            key = "bias"
        elif isinstance(leaf, White):
            key = "white"
        else:
            raise CapabilityError(f"no analytic expectations for {leaf.family}")
        if parts[key] is not None:
            raise CapabilityError(f"analytic expectations support one {key} term only")
        parts[key] = leaf
        offsets[key] = slice(pos, pos + leaf.num_params)
        pos += leaf.num_params
    return parts, offsets


def analytic_supported(kernel):
    try:
        _decompose(kernel)
    except CapabilityError:
        return False
    return True


def _check_inputs(mu, S, Z):
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if mu.shape != S.shape:
        raise ArgumentError("means and variances must have the same shape")
    if Z.shape[1] != mu.shape[1]:
        raise ArgumentError("inducing inputs and means differ in dimensionality")
    if np.any(S < 0):
        raise ArgumentError("variances must be nonnegative")
    return mu, S, Z


# -- RBF-ARD ---------------------------------------------------------------

def _rbf_psi1(k, mu, S, Z):
    w = k.weights
    den1 = w * S + 1.0                                   # n x q
    dist = mu[:, None, :] - Z[None, :, :]                # n x m x q
    expo = -0.5 * np.sum(w * dist ** 2 / den1[:, None, :], -1)
    return k.variance * np.exp(expo - 0.5 * np.sum(np.log(den1), 1)[:, None])


def _pair_terms(Z):
    """Midpoints zbar (m*m x q) and squared differences (m*m x q) of inducing pairs."""
    m, q = Z.shape
    zbar = 0.5 * (Z[:, None, :] + Z[None, :, :]).reshape(m * m, q)
    dz2 = ((Z[:, None, :] - Z[None, :, :]) ** 2).reshape(m * m, q)
    return zbar, dz2


def _rbf_psi2_i(k, mu, S, Z):
    w = k.weights
    n, q = mu.shape
    m = Z.shape[0]
    den2 = 2.0 * w * S + 1.0
    a = w / den2                                          # n x q
    zbar, dz2 = _pair_terms(Z)
    # sum_j a_ij (mu_ij - zbar_j)^2, expanded so that the pair sum is a matmul
    quad = (np.sum(a * mu ** 2, 1)[:, None] - 2.0 * (a * mu) @ zbar.T
            + a @ (zbar ** 2).T)
    log_t = (2.0 * np.log(k.variance) - 0.5 * np.sum(np.log(den2), 1)[:, None]
             - 0.25 * (dz2 @ w)[None, :] - quad)
    return np.exp(log_t).reshape(n, m, m)


def _rbf_grads(k, mu, S, Z, psi1, psi2_i, G1, G2):
    """Pull back G1 = dL/dPsi1 (n x m) and symmetric G2 = dL/dPsi2 (m x m)."""
    w = k.weights
    n, q = mu.shape
    dmu = np.zeros_like(mu)
    dS = np.zeros_like(S)
    dZ = np.zeros_like(Z)
    dw = np.zeros(q)

    T1 = G1 * psi1
    den1 = w * S + 1.0
    for j in range(q):
        d = mu[:, j][:, None] - Z[:, j][None, :]                  # n x m
        r = w[j] * d / den1[:, j][:, None]
        dmu[:, j] -= np.sum(T1 * r, 1)
        dZ[:, j] += np.sum(T1 * r, 0)
        dS[:, j] -= 0.5 * np.sum(T1 * (w[j] / den1[:, j][:, None] - r ** 2), 1)
        dw[j] -= 0.5 * np.sum(T1 * (S[:, j][:, None] / den1[:, j][:, None]
                                    + d ** 2 / den1[:, j][:, None] ** 2))
    dlogvar = np.sum(T1)

    if psi2_i is not None:
        m = Z.shape[0]
        T2 = (G2[None] * psi2_i).reshape(n, m * m)
        zbar, dz2 = _pair_terms(Z)
        den2 = 2.0 * w * S + 1.0
        inv = 1.0 / den2
        sT2 = T2.sum(1)[:, None]                                     # n x 1
        T2z = T2 @ zbar                                              # n x q
        sT2e = mu * sT2 - T2z                                        # sum T2 (mu - zbar)
        sT2e2 = mu ** 2 * sT2 - 2.0 * mu * T2z + T2 @ zbar ** 2
        dmu -= 2.0 * w * sT2e * inv
        dS += -w * sT2 * inv + 2.0 * w ** 2 * sT2e2 * inv ** 2
        colT2 = T2.sum(0)                                            # m*m
        dw += (np.sum(-S * sT2 * inv - sT2e2 * inv ** 2, 0) - 0.25 * colT2 @ dz2)
        # sum_i T2_i (mu_i - zbar) / den2_i, per pair and latent dim
        pe = T2.T @ (mu * inv) - (T2.T @ inv) * zbar                 # m*m x q
        delta = (Z[:, None, :] - Z[None, :, :]).reshape(m * m, q)
        # symmetric G2: both inducing slots contribute equally
        pair = -0.5 * w * colT2[:, None] * delta + w * pe
        dZ += 2.0 * pair.reshape(m, m, q).sum(1)
        dlogvar += 2.0 * np.sum(T2)
    return dmu, dS, dZ, np.concatenate([[dlogvar], dw * w])


# -- Linear-ARD ------------------------------------------------------------

def _lin_psi1(k, mu, S, Z):
    return (mu * k.weights) @ Z.T


def _lin_psi2_i(k, mu, S, Z, psi1):
    Zw = Z * k.weights
    return psi1[:, :, None] * psi1[:, None, :] + np.einsum("ij,kj,lj->ikl", S, Zw, Zw)


def _lin_grads(k, mu, S, Z, psi1, G1, G2, with_psi2):
    w = k.weights
    D1 = G1.copy()
    if with_psi2:
        D1 = D1 + 2.0 * psi1 @ G2
    dmu = D1 @ Z * w
    dZ = D1.T @ mu * w
    dw = np.sum((D1.T @ mu) * Z, 0)
    dS = np.zeros_like(S)
    if with_psi2:
        zGz = np.einsum("kj,kl,lj->j", Z, G2, Z)
        s = S.sum(0)
        dS += w ** 2 * zGz
        dZ += 2.0 * (G2 @ Z) * (w ** 2 * s)
        dw += 2.0 * w * s * zGz
    return dmu, dS, dZ, dw * w


# -- public API ------------------------------------------------------------

def _blocks(n):
    return [slice(i, min(i + ROW_BLOCK, n)) for i in range(0, n, ROW_BLOCK)]


def psi_statistics(kernel, mu, S, Z, per_point=False):
    """Analytic psi statistics.

    Raises ``CapabilityError`` for kernels outside {RbfArd | LinearArd}
    (+ Bias) (+ White); use ``psi_quadrature_oracle`` for those.
    """
    mu, S, Z = _check_inputs(mu, S, Z)
    n = mu.shape[0]
    if not per_point and n > ROW_BLOCK:
        # rows are independent; blocking keeps the n x m x m temporaries small
        parts = [_psi_block(kernel, mu[b], S[b], Z, False) for b in _blocks(n)]
        psi2 = sum(ps.psi2 for ps in parts)
        return PsiStats(float(sum(ps.psi0 for ps in parts)),
                        np.vstack([ps.psi1 for ps in parts]), 0.5 * (psi2 + psi2.T))
    return _psi_block(kernel, mu, S, Z, per_point)


def _psi_block(kernel, mu, S, Z, per_point):
    parts, _ = _decompose(kernel)
    main, bias, white = parts["main"], parts["bias"], parts["white"]
    n, m = mu.shape[0], Z.shape[0]
    for leaf in (main, bias, white):
        if leaf is not None:
            leaf._check(Z, None)

    psi0_i = np.zeros(n)
    psi1 = np.zeros((n, m))
    psi2_i = np.zeros((n, m, m))
    if isinstance(main, RbfArd):
        psi0_i += main.variance
        psi1 += _rbf_psi1(main, mu, S, Z)
        psi2_i += _rbf_psi2_i(main, mu, S, Z)
    elif isinstance(main, LinearArd):
        psi0_i += np.sum(main.weights * (mu ** 2 + S), 1)
        p1 = _lin_psi1(main, mu, S, Z)
        psi1 += p1
        psi2_i += _lin_psi2_i(main, mu, S, Z, p1)
    if bias is not None:
        b = bias.variance
        psi0_i += b
        psi2_i += b * (psi1[:, :, None] + psi1[:, None, :]) + b ** 2
        psi1 += b
    if white is not None:
        psi0_i += white.variance

    psi0 = float(np.sum(psi0_i))
    psi2 = np.sum(psi2_i, 0)
    psi2 = 0.5 * (psi2 + psi2.T)
    if per_point:
        return PsiStats(psi0, psi1, psi2, psi0_i, psi2_i)
    return PsiStats(psi0, psi1, psi2)


def psi_gradients(kernel, mu, S, Z, dpsi0, dpsi1, dpsi2):
    """Vector-Jacobian product of the psi statistics.

    Given ``dpsi0`` (scalar, or per point of shape (n,)), ``dpsi1`` (n x m)
    and ``dpsi2`` (m x m), returns dL/dmu, dL/dS (both n x q), dL/dZ (m x q)
    and dL/dlog(theta) for the scalar ``L = dpsi0*psi0 + <dpsi1, Psi1> +
    <dpsi2, Psi2>``.  Contracting against one-hot cotangents recovers
    individual partial derivatives.
    """
    mu, S, Z = _check_inputs(mu, S, Z)
    n = mu.shape[0]
    g0 = np.broadcast_to(np.asarray(dpsi0, dtype=float), (n,))
    G1 = np.asarray(dpsi1, dtype=float)
    if n > ROW_BLOCK:
        parts = [_grad_block(kernel, mu[b], S[b], Z, g0[b], G1[b], dpsi2) for b in _blocks(n)]
        return PsiGradients(np.vstack([g.mu for g in parts]), np.vstack([g.S for g in parts]),
                            sum(g.Z for g in parts), sum(g.params for g in parts))
    return _grad_block(kernel, mu, S, Z, g0, G1, dpsi2)


def _grad_block(kernel, mu, S, Z, g0, dpsi1, dpsi2):
    parts, offsets = _decompose(kernel)
    main, bias, white = parts["main"], parts["bias"], parts["white"]
    n, m = mu.shape[0], Z.shape[0]
    G1 = np.asarray(dpsi1, dtype=float)
    G2 = np.asarray(dpsi2, dtype=float)
    G2 = 0.5 * (G2 + G2.T)
    with_psi2 = bool(np.any(G2))

    dparams = np.zeros(kernel.num_params)
    dmu = np.zeros_like(mu)
    dS = np.zeros_like(S)
    dZ = np.zeros_like(Z)

    G1_main = G1
    if bias is not None:
        b = bias.variance
        # cross terms b*(Psi1 1^T + 1 Psi1^T) feed back into the main Psi1
        G1_main = G1 + 2.0 * b * np.sum(G2, 1)[None, :]
        main_psi1 = np.zeros((n, m))
        if isinstance(main, RbfArd):
            main_psi1 = _rbf_psi1(main, mu, S, Z)
        elif isinstance(main, LinearArd):
            main_psi1 = _lin_psi1(main, mu, S, Z)
        s = main_psi1.sum(0)
        cross = np.sum(G2 * (s[:, None] + s[None, :]))
        dparams[offsets["bias"]] = b * (np.sum(g0) + np.sum(G1) + cross + 2.0 * n * b * np.sum(G2))
    if white is not None:
        dparams[offsets["white"]] = white.variance * np.sum(g0)

    if isinstance(main, RbfArd):
        psi1 = _rbf_psi1(main, mu, S, Z)
        psi2_i = _rbf_psi2_i(main, mu, S, Z) if with_psi2 else None
        a, b_, c, d = _rbf_grads(main, mu, S, Z, psi1, psi2_i, G1_main, G2)
        d[0] += main.variance * np.sum(g0)
    elif isinstance(main, LinearArd):
        psi1 = _lin_psi1(main, mu, S, Z)
        a, b_, c, d = _lin_grads(main, mu, S, Z, psi1, G1_main, G2, with_psi2)
        w = main.weights
        a = a + 2.0 * g0[:, None] * w * mu
        b_ = b_ + g0[:, None] * w
        d = d + w * np.sum(g0[:, None] * (mu ** 2 + S), 0)
    else:
        a, b_, c, d = 0.0, 0.0, 0.0, None
    dmu += a
    dS += b_
    dZ += c
    if d is not None:
        dparams[offsets["main"]] = d
    return PsiGradients(dmu, dS, dZ, dparams)


def psi_quadrature_oracle(kernel, mu, S, Z, nodes=50, per_point=False):
    """Psi statistics by tensor-product Gauss-Hermite quadrature (q <= 3)."""
    mu, S, Z = _check_inputs(mu, S, Z)
    n, q = mu.shape
    m = Z.shape[0]
    if q > 3:
        raise CapabilityError("quadrature oracle limited to q <= 3 latent dimensions")
    if nodes < 20:
        raise ArgumentError("use at least 20 quadrature nodes")
    t, wts = np.polynomial.hermite.hermgauss(nodes)
    wts = wts / np.sqrt(np.pi)
    grid = np.array(list(product(t, repeat=q)))                      # nodes^q x q
    gw = np.prod(np.array(list(product(wts, repeat=q))), 1)

    psi0_i = np.zeros(n)
    psi1 = np.zeros((n, m))
    psi2_i = np.zeros((n, m, m))
    for i in range(n):
        pts = mu[i] + np.sqrt(2.0 * S[i]) * grid
        Kxz = kernel.K(pts, Z)
        psi0_i[i] = gw @ kernel.Kdiag(pts)
        psi1[i] = gw @ Kxz
        psi2_i[i] = Kxz.T @ (gw[:, None] * Kxz)
    psi2 = np.sum(psi2_i, 0)
    psi2 = 0.5 * (psi2 + psi2.T)
    if per_point:
        return PsiStats(float(psi0_i.sum()), psi1, psi2, psi0_i, psi2_i)
    return PsiStats(float(psi0_i.sum()), psi1, psi2)
