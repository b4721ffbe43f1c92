"""
Forward passes for the Linear Memory Network, its unfolded k-lag
approximation and a vanilla RNN baseline.

No bias terms anywhere: the weight-transfer equations are exact only
without them.  All initial states are zero.
"""
import functools
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InvalidInputError, NumericError

SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772


# activations -----------------------------------------------------------

def tanh(x):
    return np.tanh(x)


def tanh_grad(x):
    return 1.0 - np.tanh(x) ** 2


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def selu(x):
    x = np.asarray(x, dtype=np.float64)
    return SELU_LAMBDA * np.where(x > 0, x, SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))


def selu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return SELU_LAMBDA * np.where(x > 0, 1.0, SELU_ALPHA * np.exp(np.minimum(x, 0.0)))


ACTIVATIONS = {
    "tanh": (tanh, tanh_grad),
    "selu": (selu, selu_grad),
    "sigmoid": (sigmoid, sigmoid_grad),
}


# parameter containers --------------------------------------------------

class _Params:
    """Shared helpers; subclasses are frozen dataclasses of weight arrays."""

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if isinstance(getattr(self, f.name), np.ndarray)}

    def with_arrays(self, arrays):
        return replace(self, **arrays)

    def n_params(self):
        return int(sum(w.size for w in self.arrays().values()))


@dataclass(frozen=True)
class LMNParams(_Params):
    W_xh: np.ndarray  # p x a
    W_mh: np.ndarray  # p x m
    W_hm: np.ndarray  # m x p
    W_mm: np.ndarray  # m x m
    W_out: np.ndarray  # o x m (variant B) or o x p (variant A)
    variant: str = "B"

    def __post_init__(self):
        if self.variant not in ("A", "B"):
            raise InvalidInputError(f"variant must be 'A' or 'B', got {self.variant!r}")
        p, a = self.W_xh.shape
        m = self.W_mm.shape[0]
        expected = {
            "W_xh": (p, a), "W_mh": (p, m), "W_hm": (m, p), "W_mm": (m, m),
            "W_out": (self.W_out.shape[0], m if self.variant == "B" else p),
        }
        _check_shapes(self, expected)

    @property
    def sizes(self):
        p, a = self.W_xh.shape
        return {"a": a, "p": p, "m": self.W_mm.shape[0], "o": self.W_out.shape[0]}


@dataclass(frozen=True)
class UnfoldedParams(_Params):
    W_xh: np.ndarray  # p x a
    W_hh: np.ndarray  # k x p x p; W_hh[i-1] multiplies h_{t-i}
    W_o: np.ndarray  # (k+1) x o x p; W_o[i] multiplies h_{t-i}
    hidden_activation: str = "tanh"

    def __post_init__(self):
        if self.hidden_activation not in ("tanh", "selu"):
            raise InvalidInputError(f"unsupported hidden activation {self.hidden_activation!r}")
        p, a = self.W_xh.shape
        if self.W_hh.ndim != 3 or self.W_hh.shape[0] < 1:
            raise InvalidInputError("W_hh must have shape (k, p, p) with k >= 1")
        k = self.W_hh.shape[0]
        o = self.W_o.shape[1] if self.W_o.ndim == 3 else -1
        _check_shapes(self, {"W_xh": (p, a), "W_hh": (k, p, p), "W_o": (k + 1, o, p)})

    @property
    def k(self):
        return self.W_hh.shape[0]

    @property
    def sizes(self):
        p, a = self.W_xh.shape
        return {"a": a, "p": p, "o": self.W_o.shape[1], "k": self.k}


@dataclass(frozen=True)
class RNNParams(_Params):
    W_xh: np.ndarray  # p x a
    W_hh: np.ndarray  # p x p
    W_o: np.ndarray  # o x p

    def __post_init__(self):
        p, a = self.W_xh.shape
        _check_shapes(self, {"W_xh": (p, a), "W_hh": (p, p), "W_o": (self.W_o.shape[0], p)})

    @property
    def sizes(self):
        p, a = self.W_xh.shape
        return {"a": a, "p": p, "o": self.W_o.shape[0]}


def _check_shapes(params, expected):
    for name, shape in expected.items():
        w = getattr(params, name)
        if not isinstance(w, np.ndarray) or w.shape != shape:
            got = getattr(w, "shape", None)
            raise InvalidInputError(f"{name} has shape {got}, expected {shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError(f"{name} contains NaN or Inf")


# initialisation ---------------------------------------------------------

def _uniform(rng, rows, cols):
    s = 1.0 / np.sqrt(cols)
    return rng.uniform(-s, s, size=(rows, cols))


def init_lmn(a, p, m, o, variant="B", seed=0):
    """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` per matrix."""
    rng = np.random.default_rng(seed)
    return LMNParams(
        W_xh=_uniform(rng, p, a),
        W_mh=_uniform(rng, p, m),
        W_hm=_uniform(rng, m, p),
        W_mm=_uniform(rng, m, m),
        W_out=_uniform(rng, o, m if variant == "B" else p),
        variant=variant,
    )


def init_unfolded(a, p, o, k, hidden_activation="tanh", seed=0):
    rng = np.random.default_rng(seed)
    W_xh = _uniform(rng, p, a)
    W_hh = np.stack([_uniform(rng, p, p) for _ in range(k)])
    W_o = np.stack([_uniform(rng, o, p) for _ in range(k + 1)])
    return UnfoldedParams(W_xh=W_xh, W_hh=W_hh, W_o=W_o, hidden_activation=hidden_activation)


def init_rnn(a, p, o, seed=0):
    rng = np.random.default_rng(seed)
    return RNNParams(W_xh=_uniform(rng, p, a), W_hh=_uniform(rng, p, p), W_o=_uniform(rng, o, p))


# forward passes ----------------------------------------------------------

@dataclass
class Trace:
    """Per-timestep activations; every stream is an ``(l, dim)`` array.

    ``*_pre`` entries hold pre-activations, kept for backpropagation.
    """
    h: np.ndarray
    y: np.ndarray
    h_pre: np.ndarray
    y_pre: np.ndarray
    hm: np.ndarray = None


def as_sequence(sequence, dim):
    seq = np.asarray(sequence, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise InvalidInputError("sequence must be a non-empty (length, dim) array")
    if seq.shape[1] != dim:
        raise InvalidInputError(f"input dim {seq.shape[1]} does not match model input size {dim}")
    return seq


def _quiet(fn):
    # overflow is reported through NumericError, not numpy warnings
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args, **kwargs)
    return wrapper


def _finite(t, *values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise NumericError("non-finite activation", timestep=t + 1)


@_quiet
def lmn_forward(params, sequence):
    seq = as_sequence(sequence, params.W_xh.shape[1])
    length = len(seq)
    p, m = params.W_mh.shape
    h = np.zeros((length, p))
    h_pre = np.zeros((length, p))
    hm = np.zeros((length, m))
    prev = np.zeros(m)
    for t in range(length):
        h_pre[t] = params.W_xh @ seq[t] + params.W_mh @ prev
        h[t] = np.tanh(h_pre[t])
        prev = params.W_hm @ h[t] + params.W_mm @ prev
        hm[t] = prev
        _finite(t, h_pre[t], prev)
    source = hm if params.variant == "B" else h
    y_pre = source @ params.W_out.T
    return Trace(h=h, y=sigmoid(y_pre), h_pre=h_pre, y_pre=y_pre, hm=hm)


@_quiet
def unfolded_forward(params, sequence):
    seq = as_sequence(sequence, params.W_xh.shape[1])
    act, _ = ACTIVATIONS[params.hidden_activation]
    length = len(seq)
    k = params.k
    p = params.W_xh.shape[0]
    h = np.zeros((length, p))
    h_pre = np.zeros((length, p))
    for t in range(length):
        z = params.W_xh @ seq[t]
        for i in range(1, min(k, t) + 1):
            z = z + params.W_hh[i - 1] @ h[t - i]
        h_pre[t] = z
        h[t] = act(z)
        _finite(t, h[t])
    y_pre = h @ params.W_o[0].T
    for i in range(1, k + 1):
        if i < length:
            y_pre[i:] += h[:-i] @ params.W_o[i].T
    return Trace(h=h, y=sigmoid(y_pre), h_pre=h_pre, y_pre=y_pre)


@_quiet
def rnn_forward(params, sequence):
    seq = as_sequence(sequence, params.W_xh.shape[1])
    length = len(seq)
    p = params.W_xh.shape[0]
    h = np.zeros((length, p))
    h_pre = np.zeros((length, p))
    prev = np.zeros(p)
    for t in range(length):
        h_pre[t] = params.W_xh @ seq[t] + params.W_hh @ prev
        prev = np.tanh(h_pre[t])
        h[t] = prev
        _finite(t, h_pre[t])
    y_pre = h @ params.W_o.T
    return Trace(h=h, y=sigmoid(y_pre), h_pre=h_pre, y_pre=y_pre)


def forward(params, sequence):
    """Dispatch on the parameter type."""
    if isinstance(params, LMNParams):
        return lmn_forward(params, sequence)
    if isinstance(params, UnfoldedParams):
        return unfolded_forward(params, sequence)
    if isinstance(params, RNNParams):
        return rnn_forward(params, sequence)
    raise InvalidInputError(f"unknown parameter type {type(params).__name__}")


def model_kind(params):
    if isinstance(params, LMNParams):
        return "lmn"
    if isinstance(params, UnfoldedParams):
        return "unfolded"
    if isinstance(params, RNNParams):
        return "rnn"
    raise InvalidInputError(f"unknown parameter type {type(params).__name__}")


# parameter counts ---------------------------------------------------------

def parameter_count(arch, x, h=None, f=None, m=None):
    """
    Recurrent-core parameter count (output layers excluded).

    ``LSTM: 4(x+h)h``, ``GRU: 3(x+h)h``, ``RNN: (x+h)h`` and
    ``LMN: (x+m)f + (f+m)m`` with ``f`` functional and ``m`` memory units.
    """
    arch = arch.upper()
    if arch == "LMN":
        if f is None or m is None:
            raise InvalidInputError("LMN needs f and m")
        sizes = (x, f, m)
    else:
        if h is None:
            raise InvalidInputError(f"{arch} needs h")
        sizes = (x, h)
    if min(sizes) < 1:
        raise InvalidInputError("sizes must be >= 1")
    if arch == "LSTM":
        return 4 * (x + h) * h
    if arch == "GRU":
        return 3 * (x + h) * h
    if arch == "RNN":
        return (x + h) * h
    if arch == "LMN":
        return (x + m) * f + (f + m) * m
    raise InvalidInputError(f"unknown architecture {arch!r}")
