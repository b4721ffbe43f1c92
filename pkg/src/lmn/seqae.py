"""
Linear autoencoder for sequences.

The encoder is the linear recurrence ``y_t = A x_t + B y_{t-1}`` and the
decoder recovers ``(x_t, y_{t-1})`` from ``y_t`` through ``C = [A.T; B.T]``.
Both matrices are obtained in closed form from a truncated SVD of the data
matrix ``Xi`` whose row ``t`` is the reversed, zero-padded prefix
``[x_t, x_{t-1}, ..., x_1, 0, ..., 0]`` of a sequence.
"""
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidInputError

DENSE_BUDGET = 10**8


def as_batch(batch):
    """
    Validate a batch of sequences.

    Each sequence is converted to a float64 array of shape ``(l, a)`` with
    ``l >= 1``; all sequences must share ``a``.
    """
    if batch is None or len(batch) == 0:
        raise InvalidInputError("empty batch")
    out = []
    dim = None
    for q, seq in enumerate(batch):
        arr = np.asarray(seq, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InvalidInputError(f"sequence {q} must be a non-empty (length, dim) array")
        if dim is None:
            dim = arr.shape[1]
        elif arr.shape[1] != dim:
            raise InvalidInputError(f"sequence {q} has dim {arr.shape[1]}, expected {dim}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"sequence {q} contains NaN or Inf")
        out.append(arr)
    return out


def sequence_rows(seq, max_len):
    """Rows of the data matrix for a single ``(l, a)`` sequence."""
    length, a = seq.shape
    rows = np.zeros((length, a * max_len))
    for lag in range(length):
        rows[lag:, lag * a:(lag + 1) * a] = seq[:length - lag]
    return rows


def build_data_matrix(batch):
    """
    Stack the per-sequence data matrices, zero-padding columns to the
    longest sequence.  Shape is ``(sum(l_q), a * max_len)``.
    """
    batch = as_batch(batch)
    max_len = max(len(s) for s in batch)
    return np.vstack([sequence_rows(s, max_len) for s in batch])


def data_gram(batch):
    """
    ``Xi.T @ Xi`` accumulated lag by lag, without materializing ``Xi``.

    Block ``(i, i + d)`` equals ``sum_{s=d}^{l-1-i} x_s x_{s-d}^T`` summed
    over sequences, which is a cumulative sum over ``s`` per offset ``d``.
    """
    batch = as_batch(batch)
    a = batch[0].shape[1]
    max_len = max(len(s) for s in batch)
    G = np.zeros((a * max_len, a * max_len))
    for seq in batch:
        length = len(seq)
        for d in range(length):
            prods = np.einsum("si,sj->sij", seq[d:], seq[:length - d])
            csum = np.cumsum(prods, axis=0)  # csum[n] = sum_{s=d}^{d+n}
            for i in range(length - d):
                block = csum[length - 1 - i - d]
                j = i + d
                G[i * a:(i + 1) * a, j * a:(j + 1) * a] += block
                if d:
                    G[j * a:(j + 1) * a, i * a:(i + 1) * a] += block.T
    return G


@dataclass(frozen=True)
class AutoencoderParams:
    A: np.ndarray  # p x a
    B: np.ndarray  # p x p
    train_len: int
    singular_values: np.ndarray = field(default=None, repr=False)
    U: np.ndarray = field(default=None, repr=False)

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def a(self):
        return self.A.shape[1]

    @property
    def C(self):
        return np.vstack([self.A.T, self.B.T])


def encoder_from_basis(U, a):
    """``A = U^T P`` and ``B = U^T R U`` for a basis of ``a``-sized blocks."""
    A = U[:a].T.copy()
    B = U[a:].T @ U[:-a]
    return A, B


def fit(batch, p="auto", max_p=None, rel_tol=linalg.DEFAULT_REL_TOL, dense_budget=DENSE_BUDGET):
    """
    Fit the autoencoder in closed form.

    Parameters
    ----------
    batch : sequence of array_like, each (l, a)
    p : int or "auto"
        Memory size.  ``"auto"`` uses the numerical rank of ``Xi`` (capped
        by ``max_p``).  Requests above the rank are silently reduced; check
        ``params.p`` for the size actually used.
    dense_budget : int
        Above this many entries ``Xi`` is never built and the basis comes
        from the eigendecomposition of ``Xi.T @ Xi``.
    """
    batch = as_batch(batch)
    if p != "auto" and (not isinstance(p, (int, np.integer)) or p < 1):
        raise InvalidInputError(f"p must be a positive integer or 'auto', got {p!r}")
    a = batch[0].shape[1]
    max_len = max(len(s) for s in batch)
    n_rows = sum(len(s) for s in batch)
    cap = max_p if p == "auto" else p

    if n_rows * a * max_len <= dense_budget:
        full = linalg.svd(build_data_matrix(batch), tol=rel_tol)
    else:
        U_all, _ = linalg.eig_gram(data_gram(batch), tol=rel_tol)
        # singular values from the projected rows are more accurate than sqrt(eig)
        sq = np.zeros(U_all.shape[1])
        for seq in batch:
            sq += np.sum((sequence_rows(seq, max_len) @ U_all) ** 2, axis=0)
        order = np.argsort(-sq, kind="stable")
        U_all = U_all[:, order]
        S = np.sqrt(sq[order])
        keep = linalg.rank_estimate(S, rel_tol)
        _, U_keep = linalg.fix_signs(np.zeros((0, keep)), U_all[:, :keep])
        full = linalg.SvdResult(V=np.zeros((0, keep)), S=S[:keep], U=U_keep)

    r = full.rank if cap is None else min(full.rank, int(cap))
    U = full.U[:, :r]
    A, B = encoder_from_basis(U, a)
    return AutoencoderParams(A=A, B=B, train_len=max_len, singular_values=full.S, U=U)


def truncate(params, p):
    """Nested truncation of a fit to its first ``p`` singular directions."""
    if params.U is None:
        raise InvalidInputError("params carry no basis; refit to truncate")
    if not 1 <= p <= params.U.shape[1]:
        raise InvalidInputError(f"p={p} outside [1, {params.U.shape[1]}]")
    U = params.U[:, :p]
    A, B = encoder_from_basis(U, params.a)
    return AutoencoderParams(A=A, B=B, train_len=params.train_len,
                             singular_values=params.singular_values, U=U)


def _check_dim(vec, size, what):
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape[-1] != size:
        raise InvalidInputError(f"{what} has dim {vec.shape[-1]}, expected {size}")
    return vec


def encode(params, sequence):
    """All states ``y_1 .. y_l`` as an ``(l, p)`` array, starting from ``y_0 = 0``."""
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    _check_dim(seq, params.a, "input")
    states = np.zeros((len(seq), params.p))
    y = np.zeros(params.p)
    for t, x in enumerate(seq):
        y = params.A @ x + params.B @ y
        states[t] = y
    return states


def decode_step(params, y):
    """Split ``C y`` into the input estimate and the previous state."""
    y = _check_dim(y, params.p, "state")
    return params.A.T @ y, params.B.T @ y


def reconstruct(params, y_final, steps):
    """Decode ``steps`` inputs backwards from ``y_final``, most recent first."""
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    y = _check_dim(y_final, params.p, "state")
    out = np.zeros((steps, params.a))
    for i in range(steps):
        out[i], y = decode_step(params, y)
    return out


def reconstruction_error(params, batch):
    """
    Iterative reconstruction error of every sequence from its final state.

    Returns a dict with ``per_timestep`` (one array per sequence, squared
    error aligned to the original time index) and ``total``.
    """
    batch = as_batch(batch)
    per_timestep = []
    for seq in batch:
        states = encode(params, seq)
        rec = reconstruct(params, states[-1], len(seq))[::-1]
        per_timestep.append(np.sum((rec - seq) ** 2, axis=1))
    total = float(sum(e.sum() for e in per_timestep))
    return {"per_timestep": per_timestep, "total": total}


def truncation_error(singular_values, p):
    """Squared Frobenius error of the rank-``p`` truncation: ``sum_{i>p} S_i^2``."""
    S = np.asarray(singular_values, dtype=np.float64)
    return float(np.sum(S[p:] ** 2))
