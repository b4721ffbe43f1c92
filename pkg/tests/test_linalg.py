import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmn import linalg
from lmn.errors import ConvergenceError, InvalidInputError

from conftest import svd_oracle

METHODS = ["lapack", "jacobi"]


def assert_orthonormal(Q, atol=1e-10):
    np.testing.assert_allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=atol, rtol=0)


@pytest.mark.parametrize("method", METHODS)
def test_identity(method):
    res = linalg.svd(np.eye(3), method=method)
    np.testing.assert_allclose(res.S, [1, 1, 1], atol=1e-14)
    assert_orthonormal(res.U)
    assert_orthonormal(res.V)


@pytest.mark.parametrize("method", METHODS)
def test_diagonal_rank_one(method):
    res = linalg.svd([[3.0, 0.0], [0.0, 0.0]], tol=1e-10, method=method)
    np.testing.assert_allclose(res.S, [3.0])
    assert linalg.rank_estimate(linalg.svd([[3.0, 0.0], [0.0, 0.0]], method="lapack").S, 1e-10) == 1


@pytest.mark.parametrize("method", METHODS)
def test_rank_two_product(rng, method):
    M = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 4))
    full = linalg.svd(M, method=method)
    oracle = svd_oracle(M)
    # the oracle resolves squared values only, so compare the significant part
    assert np.count_nonzero(oracle > 1e-6 * oracle[0]) == 2
    assert np.count_nonzero(full.S > 1e-8 * full.S[0]) == 2
    np.testing.assert_allclose(full.S[:2], oracle[:2], rtol=1e-10)
    assert linalg.rank_estimate(full.S, 1e-10) == 2


@pytest.mark.parametrize(
    "S, tol, expected",
    [((5.0, 3.0, 1e-14), 1e-10, 2), ((0.0, 0.0), 1e-10, 0), ((0.0, 0.0), 0.0, 0), ((), 1e-10, 0), ((2.0,), 0.5, 1)],
)
def test_rank_estimate(S, tol, expected):
    assert linalg.rank_estimate(S, tol) == expected


def test_full_reconstruction(rng):
    M = rng.normal(size=(9, 5))
    for method in METHODS:
        res = linalg.svd(M, method=method)
        assert np.linalg.norm(M - res.reconstruct()) <= 1e-8 * np.linalg.norm(M)


def test_truncation_error_matches_tail(rng):
    M = rng.normal(size=(8, 6))
    full = svd_oracle(M)
    for r in range(1, 6):
        res = linalg.svd(M, max_rank=r)
        err = np.linalg.norm(M - res.reconstruct()) ** 2
        np.testing.assert_allclose(err, np.sum(full[r:] ** 2), rtol=1e-6)


def test_sign_convention(rng):
    M = rng.normal(size=(5, 4))
    res = linalg.svd(M)
    for j in range(res.rank):
        col = res.U[:, j]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0
    # deterministic regardless of route
    jac = linalg.svd(M, method="jacobi")
    np.testing.assert_allclose(np.abs(jac.U.T @ res.U), np.eye(4), atol=1e-8)
    np.testing.assert_allclose(jac.U, res.U, atol=1e-8)


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        linalg.svd([[1.0, np.nan]])
    with pytest.raises(InvalidInputError):
        linalg.gram_svd([[np.inf]])
    with pytest.raises(InvalidInputError):
        linalg.svd(np.zeros((0, 3)))


def test_jacobi_budget_exhausted(rng):
    M = rng.normal(size=(10, 10))
    with pytest.raises(ConvergenceError) as info:
        linalg.svd(M, method="jacobi", max_sweeps=1)
    assert info.value.iterations == 1


def test_zero_matrix():
    res = linalg.svd(np.zeros((3, 2)), tol=1e-10)
    assert res.rank == 0
    assert linalg.gram_svd(np.zeros((3, 2))).rank == 0


@pytest.mark.parametrize("case", ["identity", "diag", "rank2"])
def test_gram_matches_svd_examples(rng, case):
    M = {
        "identity": np.eye(3),
        "diag": np.array([[3.0, 0.0], [0.0, 0.0]]),
        "rank2": rng.normal(size=(6, 2)) @ rng.normal(size=(2, 4)),
    }[case]
    a = linalg.svd(M, tol=1e-10)
    b = linalg.gram_svd(M, tol=1e-10)
    assert a.rank == b.rank
    np.testing.assert_allclose(b.S, a.S, rtol=1e-8, atol=0)
    # vectors agree up to sign where singular values are distinct, otherwise
    # only the spanned subspace is determined
    np.testing.assert_allclose(b.U @ b.U.T, a.U @ a.U.T, atol=1e-8)
    distinct = np.diff(a.S, prepend=np.inf, append=-np.inf)
    for j in range(a.rank):
        if min(abs(distinct[j]), abs(distinct[j + 1])) > 1e-6 * a.S[0]:
            assert abs(abs(a.U[:, j] @ b.U[:, j]) - 1.0) < 1e-6


@pytest.mark.parametrize("shape", [(50, 50), (50, 20), (20, 50), (1, 7), (7, 1)])
def test_gram_agrees_with_svd_random(shape):
    rng = np.random.default_rng(sum(shape))
    M = rng.normal(size=shape)
    a, b = linalg.svd(M), linalg.gram_svd(M)
    np.testing.assert_allclose(b.S, a.S, rtol=1e-8)
    assert_orthonormal(b.U)
    assert_orthonormal(b.V)


small_matrices = st.tuples(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1)).map(
    lambda t: np.random.default_rng(t[2]).normal(size=(t[0], t[1]))
)


@settings(max_examples=60, deadline=None)
@given(small_matrices)
def test_eckart_young_property(M):
    oracle = svd_oracle(M)
    res = linalg.svd(M)
    assert_orthonormal(res.U)
    assert_orthonormal(res.V)
    rank = linalg.rank_estimate(res.S, 1e-10)
    for r in range(1, rank):
        trunc = linalg.svd(M, max_rank=r)
        err = np.linalg.norm(M - trunc.reconstruct()) ** 2
        tail = np.sum(oracle[r:] ** 2)
        assert err == pytest.approx(tail, rel=1e-6, abs=1e-12 * oracle[0] ** 2)


@settings(max_examples=40, deadline=None)
@given(small_matrices)
def test_jacobi_matches_lapack(M):
    a = linalg.svd(M)
    b = linalg.svd(M, method="jacobi")
    assert_orthonormal(b.U)
    assert_orthonormal(b.V)
    k = min(a.rank, b.rank)
    np.testing.assert_allclose(b.S[:k], a.S[:k], rtol=1e-10, atol=1e-13 * a.S[0])
    assert np.linalg.norm(M - b.reconstruct()) <= 1e-8 * np.linalg.norm(M)
