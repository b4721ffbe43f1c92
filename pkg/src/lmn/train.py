"""
Losses, backpropagation through time, Adam and the early-stopping loop.

A training example is an ``(inputs, targets)`` pair of ``(l, a)`` and
``(l, o)`` arrays.  For next-frame prediction ``inputs = frames[:-1]`` and
``targets = frames[1:]``.
"""
import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import data
from .errors import InvalidInputError, NumericError
from .model import (
    ACTIVATIONS,
    LMNParams,
    RNNParams,
    UnfoldedParams,
    as_sequence,
    forward,
    lmn_forward,
    rnn_forward,
    unfolded_forward,
)

log = logging.getLogger(__name__)

CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    l2: float = 0.0
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 1
    seed: int = 0
    truncation_window: int = None
    clip_norm: float = None
    frozen: tuple = ()
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be > 0")
        if self.patience < 1:
            raise InvalidInputError("patience must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.l2 < 0:
            raise InvalidInputError("l2 must be >= 0")
        if self.truncation_window is not None and self.truncation_window < 1:
            raise InvalidInputError("truncation_window must be >= 1")


# loss ---------------------------------------------------------------------

def _targets(targets, shape):
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != shape:
        raise InvalidInputError(f"targets have shape {t.shape}, predictions {shape}")
    return t


def bce_loss(predictions, targets):
    """Frame-wise binary cross-entropy, summed over units, averaged over time."""
    y = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    t = _targets(np.atleast_2d(targets), y.shape)
    y = np.clip(y, CLAMP, 1.0 - CLAMP)
    return float(-np.sum(t * np.log(y) + (1.0 - t) * np.log1p(-y)) / y.shape[0])


def _output_delta(y, targets):
    """d loss / d output pre-activation, exact for the clamped loss."""
    t = _targets(targets, y.shape)
    inside = (y > CLAMP) & (y < 1.0 - CLAMP)
    return np.where(inside, y - t, 0.0) / y.shape[0]


def l2_penalty(params, l2):
    if not l2:
        return 0.0
    return 0.5 * l2 * sum(float(np.sum(w * w)) for w in params.arrays().values())


def _add_l2(params, grads, l2):
    if l2:
        for name, w in params.arrays().items():
            grads[name] = grads[name] + l2 * w
    return grads


def _check_grads(grads):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")


# backward passes ---------------------------------------------------------

def lmn_backward(params, sequence, targets, l2=0.0):
    """Loss and exact BPTT gradients for an LMN (both output variants)."""
    x = as_sequence(sequence, params.W_xh.shape[1])
    tr = lmn_forward(params, x)
    loss = bce_loss(tr.y, targets) + l2_penalty(params, l2)
    dy = _output_delta(tr.y, targets)

    length = len(x)
    m = params.W_mm.shape[0]
    hm_prev = np.vstack([np.zeros((1, m)), tr.hm[:-1]])
    if params.variant == "B":
        d_hm_out = dy @ params.W_out
        d_h_out = np.zeros_like(tr.h)
        source = tr.hm
    else:
        d_hm_out = np.zeros_like(tr.hm)
        d_h_out = dy @ params.W_out
        source = tr.h

    d_hm = np.zeros_like(tr.hm)
    d_hpre = np.zeros_like(tr.h)
    carry = np.zeros(m)
    dtanh = 1.0 - tr.h ** 2
    for t in range(length - 1, -1, -1):
        d_hm[t] = d_hm_out[t] + carry
        d_hpre[t] = (d_h_out[t] + params.W_hm.T @ d_hm[t]) * dtanh[t]
        carry = params.W_mm.T @ d_hm[t] + params.W_mh.T @ d_hpre[t]
        if not np.all(np.isfinite(carry)):
            raise NumericError("non-finite gradient", timestep=t + 1)

    grads = {
        "W_xh": d_hpre.T @ x,
        "W_mh": d_hpre.T @ hm_prev,
        "W_hm": d_hm.T @ tr.h,
        "W_mm": d_hm.T @ hm_prev,
        "W_out": dy.T @ source,
    }
    grads = _add_l2(params, grads, l2)
    _check_grads(grads)
    return loss, grads


def unfolded_backward(params, sequence, targets, l2=0.0, truncation_window=None):
    """
    Loss and gradients for the unfolded network.

    With ``truncation_window=w`` the loss at time ``t`` only reaches hidden
    states ``h_s`` with ``t - s < w``; parameter gradients that need no flow
    through hidden states (the output lag matrices) are unaffected.
    """
    x = as_sequence(sequence, params.W_xh.shape[1])
    tr = unfolded_forward(params, x)
    loss = bce_loss(tr.y, targets) + l2_penalty(params, l2)
    dy = _output_delta(tr.y, targets)
    _, act_grad = ACTIVATIONS[params.hidden_activation]
    dact = act_grad(tr.h_pre)
    length = len(x)
    k = params.k

    g_xh = np.zeros_like(params.W_xh)
    g_hh = np.zeros_like(params.W_hh)
    g_o = np.zeros_like(params.W_o)
    for i in range(k + 1):
        if i < length:
            g_o[i] = dy[i:].T @ tr.h[:length - i]

    def sweep(dh, lo, hi):
        # backward over t in [lo, hi]; flow into h_s allowed only for s >= lo
        d_hpre = np.zeros_like(dh)
        for t in range(hi, lo - 1, -1):
            d_hpre[t] = dh[t] * dact[t]
            for i in range(1, min(k, t - lo) + 1):
                dh[t - i] += params.W_hh[i - 1].T @ d_hpre[t]
        for i in range(1, k + 1):
            if i < length:
                g_hh[i - 1] += d_hpre[i:].T @ tr.h[:length - i]
        return d_hpre

    if truncation_window is None or truncation_window >= length:
        dh = np.zeros_like(tr.h)
        for i in range(k + 1):
            if i < length:
                dh[:length - i] += dy[i:] @ params.W_o[i]
        d_hpre = sweep(dh, 0, length - 1)
        g_xh += d_hpre.T @ x
    else:
        w = truncation_window
        for t0 in range(length):
            lo = max(0, t0 - w + 1)
            dh = np.zeros_like(tr.h)
            for i in range(min(k, t0 - lo) + 1):
                dh[t0 - i] += params.W_o[i].T @ dy[t0]
            d_hpre = sweep(dh, lo, t0)
            g_xh += d_hpre.T @ x

    grads = _add_l2(params, {"W_xh": g_xh, "W_hh": g_hh, "W_o": g_o}, l2)
    _check_grads(grads)
    return loss, grads


def rnn_backward(params, sequence, targets, l2=0.0):
    x = as_sequence(sequence, params.W_xh.shape[1])
    tr = rnn_forward(params, x)
    loss = bce_loss(tr.y, targets) + l2_penalty(params, l2)
    dy = _output_delta(tr.y, targets)
    dh_out = dy @ params.W_o
    dtanh = 1.0 - tr.h ** 2
    d_hpre = np.zeros_like(tr.h)
    carry = np.zeros(tr.h.shape[1])
    for t in range(len(x) - 1, -1, -1):
        d_hpre[t] = (dh_out[t] + carry) * dtanh[t]
        carry = params.W_hh.T @ d_hpre[t]
    h_prev = np.vstack([np.zeros((1, tr.h.shape[1])), tr.h[:-1]])
    grads = {"W_xh": d_hpre.T @ x, "W_hh": d_hpre.T @ h_prev, "W_o": dy.T @ tr.h}
    grads = _add_l2(params, grads, l2)
    _check_grads(grads)
    return loss, grads


def backward(params, sequence, targets, l2=0.0, truncation_window=None):
    if isinstance(params, LMNParams):
        return lmn_backward(params, sequence, targets, l2)
    if isinstance(params, UnfoldedParams):
        return unfolded_backward(params, sequence, targets, l2, truncation_window)
    if isinstance(params, RNNParams):
        return rnn_backward(params, sequence, targets, l2)
    raise InvalidInputError(f"unknown parameter type {type(params).__name__}")


def grad_check(params, sequence, targets, step=1e-5, l2=0.0, truncation_window=None):
    """
    Largest relative disagreement between analytic and central-difference
    gradients, ``|ga - gfd| / max(1e-8, |ga| + |gfd|)``, over all entries.
    """
    _, grads = backward(params, sequence, targets, l2, truncation_window)
    worst = 0.0
    for name, w in params.arrays().items():
        fd = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            plus, minus = w.copy(), w.copy()
            plus[idx] += step
            minus[idx] -= step
            lp = backward(params.with_arrays({name: plus}), sequence, targets, l2)[0]
            lm = backward(params.with_arrays({name: minus}), sequence, targets, l2)[0]
            fd[idx] = (lp - lm) / (2 * step)
        ga = grads[name]
        rel = np.abs(ga - fd) / np.maximum(1e-8, np.abs(ga) + np.abs(fd))
        worst = max(worst, float(rel.max()))
    return worst


# optimiser -------------------------------------------------------------

@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, config):
    """
    One bias-corrected Adam update with ``grad += l2 * W`` weight decay.
    Returns ``(new_params, new_state)``; inputs are left untouched.
    """
    t = state.t + 1
    new_m, new_v, updated = dict(state.m), dict(state.v), {}
    b1, b2 = config.beta1, config.beta2
    for name, w in params.arrays().items():
        if name in config.frozen:
            continue
        g = grads[name]
        if g.shape != w.shape:
            raise InvalidInputError(f"gradient for {name} has shape {g.shape}, expected {w.shape}")
        if config.l2:
            g = g + config.l2 * w
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        updated[name] = w - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        new_m[name], new_v[name] = m, v
    return params.with_arrays(updated), AdamState(t=t, m=new_m, v=new_v)


# training loop ------------------------------------------------------------

KINDS = {"lmn": LMNParams, "unfolded": UnfoldedParams, "rnn": RNNParams}


def predict(params, inputs):
    return forward(params, inputs).y


def evaluate_accuracy(params, pairs, threshold=0.5):
    """Frame accuracy with counts summed over every frame of every pair."""
    if not pairs:
        return float("nan")
    preds = [predict(params, x) for x, _ in pairs]
    return data.frame_accuracy(preds, [t for _, t in pairs], threshold)


def mean_loss(params, pairs):
    return float(np.mean([bce_loss(predict(params, x), t) for x, t in pairs]))


def _clip(grads, max_norm):
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        return {k: g * (max_norm / norm) for k, g in grads.items()}, True
    return grads, False


def train_loop(model_kind, init_params, dataset_splits, config):
    """
    Adam training with early stopping on validation frame accuracy.

    Epoch 0 of the history describes the initial parameters.  Training stops
    after ``config.patience`` epochs without a strict improvement or at
    ``config.max_epochs``.  Returns ``(best_params, history)``.
    """
    expected = KINDS.get(model_kind)
    if expected is None:
        raise InvalidInputError(f"unknown model kind {model_kind!r}")
    if not isinstance(init_params, expected):
        raise InvalidInputError(f"{model_kind} expects {expected.__name__}, got {type(init_params).__name__}")
    train = dataset_splits.get("train") or []
    valid = dataset_splits.get("valid") or []
    if not train or not valid:
        raise InvalidInputError("train and valid splits must be non-empty")

    rng = np.random.default_rng(config.seed)
    params = init_params
    state = AdamState()
    start = time.perf_counter()
    best_acc = evaluate_accuracy(params, valid)
    best_params = params
    history = [{"epoch": 0, "train_loss": mean_loss(params, train), "val_accuracy": best_acc,
                "elapsed_seconds": 0.0, "clipped": 0}]
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        losses, clipped = [], 0
        for b in range(0, len(order), config.batch_size):
            total = None
            for idx in order[b:b + config.batch_size]:
                x, t = train[idx]
                try:
                    loss, grads = backward(params, x, t, truncation_window=config.truncation_window)
                except NumericError as exc:
                    raise NumericError(f"epoch {epoch}, sequence {idx}: {exc}") from exc
                losses.append(loss)
                total = grads if total is None else {k: total[k] + grads[k] for k in total}
            if config.clip_norm is not None:
                total, hit = _clip(total, config.clip_norm)
                clipped += hit
            params, state = adam_step(state, params, total, config)
        acc = evaluate_accuracy(params, valid)
        history.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_accuracy": acc,
                        "elapsed_seconds": time.perf_counter() - start, "clipped": clipped})
        log.debug("epoch %d loss %.5f val_acc %.4f", epoch, history[-1]["train_loss"], acc)
        if acc > best_acc:
            best_acc, best_params, stale = acc, params, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best_params, history


HISTORY_FIELDS = ("epoch", "train_loss", "val_accuracy", "elapsed_seconds")


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow([row["epoch"], repr(row["train_loss"]), repr(row["val_accuracy"]),
                             f"{row['elapsed_seconds']:.3f}"])
