"""
Three-step LMN pretraining.

1. train an unfolded network with explicit k-lag hidden connections;
2. fit the sequence autoencoder on its hidden-state sequences;
3. transfer the unfolded weights through the autoencoder decoder into an
   LMN-B.

Lag alignment: the memory state ``hm_t`` decodes to ``[h_t; h_{t-1}; ...]``
so ``W_mh`` (applied to ``hm_{t-1}``) is built from the hidden lags
``1..k`` and ``W_out`` (applied to ``hm_t``) from the output lags
``0..k-1``.  The output lag ``k`` has no counterpart in the transferred
network.
"""
from dataclasses import dataclass, field

import numpy as np

from . import seqae, train
from .errors import InvalidInputError
from .model import LMNParams, init_unfolded, lmn_forward, unfolded_forward


@dataclass(frozen=True)
class PretrainConfig:
    hidden: int = 100
    k: int = 10
    p_mem: object = "auto"
    max_p_mem: int = None
    selu_hidden: bool = True
    unfolded_train: train.TrainConfig = field(default_factory=train.TrainConfig)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.hidden < 1:
            raise InvalidInputError("hidden must be >= 1")


def collect_hidden_states(unfolded, sequences):
    """Hidden activations ``h_1..h_l`` of the unfolded net for each input sequence."""
    return [unfolded_forward(unfolded, s).h for s in sequences]


def build_decoder_stack(A, B, k):
    """
    Vertical stack ``[A.T; A.T B.T; ...; A.T (B.T)^(k-1)]`` of shape
    ``(k * p, m)`` for an autoencoder with ``A`` of shape ``(m, p)``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or B.shape != (A.shape[0], A.shape[0]):
        raise InvalidInputError(f"incompatible autoencoder shapes A {A.shape}, B {B.shape}")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    blocks = [A.T]
    for _ in range(k - 1):
        blocks.append(blocks[-1] @ B.T)
    return np.vstack(blocks)


def transfer_weights(unfolded, A, B, k=None):
    """Initialise an LMN-B from an unfolded net and a fitted autoencoder."""
    if k is None:
        k = unfolded.k
    if k != unfolded.k:
        raise InvalidInputError(f"k={k} does not match the unfolded network (k={unfolded.k})")
    p = unfolded.W_xh.shape[0]
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != p:
        raise InvalidInputError(
            f"W_hm = A: A has shape {A.shape}, needs {p} columns (functional size)")
    U = build_decoder_stack(A, B, k)
    hidden_lags = np.hstack(list(unfolded.W_hh))  # p x kp, lags 1..k
    output_lags = np.hstack(list(unfolded.W_o[:k]))  # o x kp, lags 0..k-1
    return LMNParams(
        W_xh=unfolded.W_xh.copy(),
        W_mh=hidden_lags @ U,
        W_hm=A.copy(),
        W_mm=np.asarray(B, dtype=np.float64).copy(),
        W_out=output_lags @ U,
        variant="B",
    )


def fidelity_report(unfolded, lmn, sequences, zero_last_output_lag=True):
    """
    Compare hidden states and outputs of an unfolded net and an LMN.

    With ``zero_last_output_lag`` the unfolded outputs omit the lag-``k``
    term, which the transferred LMN cannot represent.
    """
    if zero_last_output_lag:
        W_o = unfolded.W_o.copy()
        W_o[-1] = 0.0
        reference = unfolded.with_arrays({"W_o": W_o})
    else:
        reference = unfolded
    per_sequence = []
    for seq in sequences:
        u = unfolded_forward(reference, seq)
        v = lmn_forward(lmn, seq)
        per_sequence.append({
            "max_hidden_diff": float(np.max(np.abs(u.h - v.h))),
            "max_output_diff": float(np.max(np.abs(u.y - v.y))),
        })
    return {
        "max_hidden_diff": max(r["max_hidden_diff"] for r in per_sequence),
        "max_output_diff": max(r["max_output_diff"] for r in per_sequence),
        "per_sequence": per_sequence,
    }


def pretrain_pipeline(dataset, config):
    """
    Run all three steps on ``dataset`` (dict of ``(inputs, targets)`` pair
    lists).  Returns ``(lmn, diagnostics)``; ``diagnostics["unfolded"]``
    and ``diagnostics["autoencoder"]`` hold the intermediate models.

    The LMN functional part is always tanh.  With ``selu_hidden`` the
    transfer is only an initialisation and the fidelity numbers are
    reported, not expected to be small.
    """
    train_pairs = dataset.get("train") or []
    if not train_pairs:
        raise InvalidInputError("dataset has no train split")
    a = train_pairs[0][0].shape[1]
    o = train_pairs[0][1].shape[1]
    activation = "selu" if config.selu_hidden else "tanh"

    init = init_unfolded(a, config.hidden, o, config.k, activation, seed=config.seed)
    unfolded, history = train.train_loop("unfolded", init, dataset, config.unfolded_train)

    inputs = [x for x, _ in train_pairs]
    hidden = collect_hidden_states(unfolded, inputs)
    ae = seqae.fit(hidden, config.p_mem, max_p=config.max_p_mem)
    lmn = transfer_weights(unfolded, ae.A, ae.B, config.k)

    rec = seqae.reconstruction_error(ae, hidden)
    fid = fidelity_report(unfolded, lmn, inputs, zero_last_output_lag=True)
    valid = dataset.get("valid") or []
    diagnostics = {
        "ae_rank": ae.p,
        "ae_total_error": rec["total"],
        "svd_truncation_error": seqae.truncation_error(ae.singular_values, ae.p),
        "max_hidden_diff": fid["max_hidden_diff"],
        "max_output_diff": fid["max_output_diff"],
        "per_timestep_error_profile": [e.tolist() for e in rec["per_timestep"]],
        "unfolded_train_accuracy": train.evaluate_accuracy(unfolded, train_pairs),
        "lmn_train_accuracy": train.evaluate_accuracy(lmn, train_pairs),
        "unfolded_valid_accuracy": train.evaluate_accuracy(unfolded, valid) if valid else None,
        "lmn_valid_accuracy": train.evaluate_accuracy(lmn, valid) if valid else None,
        "unfolded_parameters": unfolded.n_params(),
        "lmn_parameters": lmn.n_params(),
        "unfolded_history": history,
        "unfolded": unfolded,
        "autoencoder": ae,
    }
    return lmn, diagnostics


DIAGNOSTIC_KEYS = ("ae_rank", "ae_total_error", "max_hidden_diff", "max_output_diff",
                   "per_timestep_error_profile")


def diagnostics_json(diagnostics):
    """JSON-serialisable subset of the pipeline diagnostics."""
    return {k: v for k, v in diagnostics.items() if k not in ("unfolded", "autoencoder", "unfolded_history")}
