"""Cholesky-based helpers with the package-wide jitter policy."""
import numpy as np
from scipy import linalg as sla

from .errors import NumericalError

JITTER_START = 1e-6
JITTER_MAX = 1e-2


def jitchol(A):
    """Lower Cholesky factor of ``A``, adding diagonal jitter only on failure.

    Jitter starts at ``1e-6 * mean(diag(A))`` and grows by a factor of ten up
    to ``1e-2 * mean(diag(A))``.  Returns ``(L, jitter)`` where ``jitter`` is
    the absolute amount added to the diagonal (0.0 when none was needed).
    """
    A = np.asarray(A, dtype=float)
    try:
        return sla.cholesky(A, lower=True, check_finite=True), 0.0
    except (sla.LinAlgError, ValueError):
        pass
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix contains non-finite entries")
    scale = np.mean(np.diag(A))
    if not scale > 0:
        raise NumericalError("matrix has non-positive mean diagonal")
    jitter = JITTER_START * scale
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX * scale * (1 + 1e-12):
        try:
            return sla.cholesky(A + jitter * eye, lower=True), jitter
        except sla.LinAlgError:
            jitter *= 10.0
    raise NumericalError("Cholesky failed after maximum jitter")


def logdet_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


def cho_solve(L, B):
    return sla.cho_solve((L, True), B, check_finite=False)


def cho_inverse(L):
    n = L.shape[0]
    return sla.cho_solve((L, True), np.eye(n), check_finite=False)


def solve_lower(L, B):
    return sla.solve_triangular(L, B, lower=True, check_finite=False)
