"""
Dense linear algebra kernel: truncated SVD and numerical rank.

Factorizations follow the convention ``M = V @ diag(S) @ U.T`` where ``V``
holds the left singular vectors (rows of ``M``) and ``U`` the right ones
(columns of ``M``).  ``U`` is the matrix the sequence autoencoder needs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError

DEFAULT_REL_TOL = 1e-10
EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class SvdResult:
    V: np.ndarray  # n x r, left singular vectors
    S: np.ndarray  # r, descending
    U: np.ndarray  # d x r, right singular vectors

    @property
    def rank(self):
        return self.S.shape[0]

    def reconstruct(self):
        return (self.V * self.S) @ self.U.T


def as_matrix(M, name="matrix"):
    """Validate and return ``M`` as a finite 2-D float64 array."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return M


def rank_estimate(S, rel_tol=DEFAULT_REL_TOL):
    """Number of singular values strictly above ``rel_tol * S[0]``."""
    S = np.asarray(S, dtype=np.float64)
    if S.size == 0 or S[0] <= 0:
        return 0
    return int(np.count_nonzero(S > rel_tol * S[0]))


def fix_signs(V, U):
    """Flip column pairs so the first nonzero entry of each ``U`` column is >= 0."""
    if U.size == 0:
        return V, U
    scale = np.max(np.abs(U), axis=0, keepdims=True)
    nonzero = np.abs(U) > 1e-12 * np.where(scale > 0, scale, 1.0)
    first = np.argmax(nonzero, axis=0)
    signs = np.sign(U[first, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs, U * signs


def _finish(V, S, U, max_rank, tol, floor=0.0):
    order = np.argsort(-S, kind="stable")
    V, S, U = V[:, order], S[order], U[:, order]
    if S.size and S[0] > 0:
        keep = rank_estimate(S, max(tol, floor))
        if tol == 0 and floor == 0:
            keep = int(np.count_nonzero(S > 0))
    else:
        keep = 0
    if max_rank is not None:
        keep = min(keep, int(max_rank))
    V, S, U = V[:, :keep], S[:keep], U[:, :keep]
    V, U = fix_signs(V, U)
    return SvdResult(V=np.ascontiguousarray(V), S=np.ascontiguousarray(S), U=np.ascontiguousarray(U))


def _round_robin(n):
    """Pairings of a round-robin tournament over ``n`` players (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi(M, max_sweeps):
    """One-sided Jacobi (Hestenes) on the columns of a tall matrix."""
    n, d = M.shape
    pad = d % 2
    W = np.hstack([M, np.zeros((n, pad))]) if pad else M.copy()
    Q = np.eye(d + pad)
    rounds = _round_robin(d + pad)
    for sweep in range(max_sweeps):
        rotated = False
        for left, right in rounds:
            wi, wj = W[:, left], W[:, right]
            alpha = np.einsum("ij,ij->j", wi, wi)
            beta = np.einsum("ij,ij->j", wj, wj)
            gamma = np.einsum("ij,ij->j", wi, wj)
            active = np.abs(gamma) > EPS * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0] = 1.0
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            qi, qj = Q[:, left], Q[:, right]
            W[:, left], W[:, right] = c * wi - s * wj, s * wi + c * wj
            Q[:, left], Q[:, right] = c * qi - s * qj, s * qi + c * qj
        if not rotated:
            return W[:, :d], Q[:d, :d], sweep + 1
    raise ConvergenceError("Jacobi SVD did not converge", max_sweeps)


def svd(M, max_rank=None, tol=0.0, method="lapack", max_sweeps=None):
    """
    Truncated singular value decomposition.

    Parameters
    ----------
    M : array_like, shape (n, d)
    max_rank : int or None
        Keep at most this many singular triplets.
    tol : float
        Relative threshold; values ``<= tol * S[0]`` are discarded.
    method : {"lapack", "jacobi"}
        ``"jacobi"`` runs a vectorised one-sided Jacobi iteration bounded by
        ``max_sweeps`` (default ``100 * max(n, d)``).

    Returns
    -------
    SvdResult
    """
    M = as_matrix(M)
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    n, d = M.shape
    if method == "lapack":
        try:
            V, S, Ut = np.linalg.svd(M, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"LAPACK SVD failed: {exc}", -1) from exc
        return _finish(V, S, Ut.T, max_rank, tol)
    if method != "jacobi":
        raise InvalidInputError(f"unknown SVD method {method!r}")

    if max_sweeps is None:
        max_sweeps = 100 * max(n, d)
    transpose = n < d
    A = M.T if transpose else M
    W, Q, _ = _jacobi(A, max_sweeps)
    S = np.linalg.norm(W, axis=0)
    floor = max(A.shape) * EPS
    smax = S.max() if S.size else 0.0
    safe = np.where(S > floor * smax, S, 1.0)
    left = W / safe
    if transpose:
        # A = M.T = left diag(S) Q.T  =>  M = Q diag(S) left.T
        return _finish(Q, S, left, max_rank, tol, floor)
    return _finish(left, S, Q, max_rank, tol, floor)


def eig_gram(G, max_rank=None, tol=0.0):
    """
    Leading eigenpairs of a symmetric PSD Gram matrix as singular pairs.

    Returns ``(vectors, singular_values)`` with singular values equal to the
    square roots of the retained eigenvalues.  Eigenvalues below
    ``max(tol**2, size * eps)`` times the largest are dropped; a Gram route
    cannot resolve singular values under ``sqrt(eps) * S[0]``.
    """
    G = as_matrix(G, "Gram matrix")
    w, Q = np.linalg.eigh((G + G.T) / 2.0)
    w, Q = w[::-1], Q[:, ::-1]
    if w.size == 0 or w[0] <= 0:
        return Q[:, :0], w[:0]
    floor = max(tol * tol, G.shape[0] * EPS)
    keep = int(np.count_nonzero(w > floor * w[0]))
    if max_rank is not None:
        keep = min(keep, int(max_rank))
    return Q[:, :keep], np.sqrt(w[:keep])


def gram_svd(M, max_rank=None, tol=0.0):
    """SVD through the eigendecomposition of the smaller Gram matrix."""
    M = as_matrix(M)
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    n, d = M.shape
    if n >= d:
        U, _ = eig_gram(M.T @ M, max_rank, tol)
        MU = M @ U
        # column norms of M U are second-order accurate in the eigenvector error
        S = np.linalg.norm(MU, axis=0)
        V = MU / S
    else:
        V, _ = eig_gram(M @ M.T, max_rank, tol)
        MV = M.T @ V
        S = np.linalg.norm(MV, axis=0)
        U = MV / S
    return _finish(V, S, U, max_rank, tol, floor=0.0 if tol else EPS)
