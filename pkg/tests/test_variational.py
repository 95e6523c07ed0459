import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vargplvm.errors import ArgumentError, StateError
from vargplvm.kernels import RbfArd
from vargplvm.variational import (DynamicalQ, FactorizedQ, dynamical_transform, kl_dynamical,
                                  kl_factorized, kl_uncertain, temporal_covariance)


def kl_oracle(m0, S0, m1, S1):
    """Two-Gaussian KL with plain dense algebra."""
    k = m0.size
    S1i = np.linalg.inv(S1)
    d = m1 - m0
    return 0.5 * (np.trace(S1i @ S0) + d @ S1i @ d - k
                  + np.linalg.slogdet(S1)[1] - np.linalg.slogdet(S0)[1])


def random_kx(rng, n):
    t = np.sort(rng.uniform(0, 3, n))
    return RbfArd(1, 1.0, [0.8]).K(t[:, None]) + 0.1 * np.eye(n)


def test_kl_factorized_examples():
    assert kl_factorized(FactorizedQ(np.zeros((3, 2)), np.ones((3, 2)))) == 0.0
    q = FactorizedQ([[1.0]], [[2.0]])
    assert kl_factorized(q) == pytest.approx(0.5 * (1 + 2 - np.log(2)) - 0.5, abs=1e-12)
    assert kl_factorized(q) == pytest.approx(0.653426, abs=1e-6)
    q2 = FactorizedQ([[1.0], [1.0]], [[2.0], [2.0]])
    assert kl_factorized(q2) == pytest.approx(2 * kl_factorized(q), rel=1e-14)


def test_kl_factorized_matches_oracle(rng):
    for _ in range(10):
        M = rng.standard_normal((4, 3))
        S = rng.uniform(0.1, 2.0, (4, 3))
        want = kl_oracle(M.ravel(), np.diag(S.ravel()), np.zeros(12), np.eye(12))
        assert kl_factorized(FactorizedQ(M, S)) == pytest.approx(want, rel=1e-10)


def test_kl_uncertain_matches_oracle(rng):
    M, S, Z = rng.standard_normal((5, 2)), rng.uniform(0.1, 1, (5, 2)), rng.standard_normal((5, 2))
    v = np.array([0.3, 1.7])
    want = kl_oracle(M.ravel(), np.diag(S.ravel()), Z.ravel(), np.diag(np.tile(v, 5)))
    assert kl_uncertain(FactorizedQ(M, S), Z, v) == pytest.approx(want, rel=1e-10)


def test_kl_dynamical_matches_oracle(rng):
    for _ in range(10):
        n, q = 4, 2
        Kx = random_kx(rng, n)
        mb, lam = rng.standard_normal((n, q)), rng.uniform(0.2, 3.0, (n, q))
        M, S_list = dynamical_transform(mb, lam, Kx)
        want = sum(kl_oracle(M[:, j], S_list[j], np.zeros(n), Kx) for j in range(q))
        assert kl_dynamical(DynamicalQ(mb, lam), Kx) == pytest.approx(want, rel=1e-10)


def test_kl_dynamical_zero_at_prior():
    # with Kx = I and a vanishing likelihood precision, q equals the prior
    q = DynamicalQ(np.zeros((3, 1)), np.full((3, 1), 1e-14))
    assert abs(kl_dynamical(q, np.eye(3))) < 1e-12


def test_kl_dynamical_permutation_invariant(rng):
    Kx = random_kx(rng, 5)
    mb, lam = rng.standard_normal((5, 3)), rng.uniform(0.2, 3.0, (5, 3))
    a = kl_dynamical(DynamicalQ(mb, lam), Kx)
    b = kl_dynamical(DynamicalQ(mb[:, ::-1], lam[:, ::-1]), Kx)
    assert a == pytest.approx(b, rel=1e-13)


def test_transform_matches_naive_inverse(rng):
    Kx = random_kx(rng, 5)
    mb, lam = rng.standard_normal((5, 2)), rng.uniform(0.2, 3.0, (5, 2))
    M, S_list = dynamical_transform(mb, lam, Kx)
    np.testing.assert_allclose(M, Kx @ mb, rtol=1e-12)
    for j, S in enumerate(S_list):
        naive = np.linalg.inv(np.linalg.inv(Kx) + np.diag(lam[:, j]))
        np.testing.assert_allclose(S, naive, rtol=1e-8, atol=1e-12)
        assert np.linalg.eigvalsh(S).min() > -1e-10


def test_transform_limits(rng):
    Kx = random_kx(rng, 4)
    M, S_list = dynamical_transform(np.zeros((4, 1)), np.full((4, 1), 1e-12), Kx)
    assert np.all(M == 0)
    np.testing.assert_allclose(S_list[0], Kx, atol=1e-10)


def test_block_diagonal_sequences(rng):
    t = np.arange(6.0)
    k = RbfArd(1, 1.0, [0.2])
    Kx = temporal_covariance(k, t, [0, 3]) + 0.05 * np.eye(6)
    assert np.all(Kx[:3, 3:] == 0) and np.all(Kx[3:, :3] == 0)
    mb, lam = rng.standard_normal((6, 2)), rng.uniform(0.5, 2, (6, 2))
    whole = kl_dynamical(DynamicalQ(mb, lam), Kx)
    parts = sum(kl_dynamical(DynamicalQ(mb[s], lam[s]), Kx[s, s])
                for s in (slice(0, 3), slice(3, 6)))
    assert whole == pytest.approx(parts, rel=1e-12)


def test_invalid_q():
    with pytest.raises(StateError):
        FactorizedQ(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ArgumentError):
        FactorizedQ(np.zeros((2, 2)), np.ones((2, 3)))
    with pytest.raises(StateError):
        DynamicalQ(np.zeros((2, 1)), -np.ones((2, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_kls_nonnegative(seed):
    rng = np.random.default_rng(seed)
    q = FactorizedQ(rng.standard_normal((3, 2)), rng.uniform(0.01, 5, (3, 2)))
    assert kl_factorized(q) >= 0
    Kx = random_kx(rng, 4)
    assert kl_dynamical(DynamicalQ(rng.standard_normal((4, 2)), rng.uniform(0.01, 5, (4, 2))), Kx) >= -1e-12
