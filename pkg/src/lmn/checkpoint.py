"""
JSON checkpoints shared by every model type.

Layout::

    {"format_version": 1, "arch": "lmn" | "unfolded" | "rnn" | "seqae",
     "sizes": {...}, "variant": "A" | "B" | null, "rng_seed": int | null,
     "matrices": {name: {"rows": r, "cols": c, "data": [row-major floats]}},
     "meta": {...}}

Floats are written with Python's shortest round-trip repr, so a load of a
save reproduces every value bit for bit.
"""
import json

import numpy as np

from .errors import InvalidInputError
from .model import LMNParams, RNNParams, UnfoldedParams
from .seqae import AutoencoderParams

FORMAT_VERSION = 1


def _pack(w):
    w = np.asarray(w, dtype=np.float64)
    return {"rows": int(w.shape[0]), "cols": int(w.shape[1]), "data": [float(v) for v in w.ravel()]}


def _unpack(entry, name):
    try:
        rows, cols, values = entry["rows"], entry["cols"], entry["data"]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"matrix {name!r} is malformed") from exc
    if len(values) != rows * cols:
        raise InvalidInputError(f"matrix {name!r}: {len(values)} values for {rows}x{cols}")
    return np.array(values, dtype=np.float64).reshape(rows, cols)


def to_dict(params, rng_seed=None, meta=None):
    variant = None
    if isinstance(params, LMNParams):
        arch, variant = "lmn", params.variant
        matrices = {k: _pack(v) for k, v in params.arrays().items()}
        sizes = params.sizes
    elif isinstance(params, UnfoldedParams):
        arch = "unfolded"
        matrices = {"W_xh": _pack(params.W_xh)}
        for i, w in enumerate(params.W_hh, start=1):
            matrices[f"W_hh_{i}"] = _pack(w)
        for i, w in enumerate(params.W_o):
            matrices[f"W_o_{i}"] = _pack(w)
        sizes = dict(params.sizes, hidden_activation=params.hidden_activation)
    elif isinstance(params, RNNParams):
        arch = "rnn"
        matrices = {k: _pack(v) for k, v in params.arrays().items()}
        sizes = params.sizes
    elif isinstance(params, AutoencoderParams):
        arch = "seqae"
        matrices = {"A": _pack(params.A), "B": _pack(params.B)}
        sizes = {"p": params.p, "a": params.a, "train_len": params.train_len}
    else:
        raise InvalidInputError(f"cannot checkpoint {type(params).__name__}")
    return {"format_version": FORMAT_VERSION, "arch": arch, "sizes": sizes, "variant": variant,
            "rng_seed": rng_seed, "matrices": matrices, "meta": meta or {}}


def from_dict(doc):
    if doc.get("format_version") != FORMAT_VERSION:
        raise InvalidInputError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    mats = {name: _unpack(entry, name) for name, entry in doc["matrices"].items()}
    arch = doc.get("arch")
    if arch == "lmn":
        return LMNParams(variant=doc["variant"], **mats)
    if arch == "rnn":
        return RNNParams(**mats)
    if arch == "unfolded":
        k = doc["sizes"]["k"]
        return UnfoldedParams(
            W_xh=mats["W_xh"],
            W_hh=np.stack([mats[f"W_hh_{i}"] for i in range(1, k + 1)]),
            W_o=np.stack([mats[f"W_o_{i}"] for i in range(k + 1)]),
            hidden_activation=doc["sizes"].get("hidden_activation", "tanh"),
        )
    if arch == "seqae":
        return AutoencoderParams(A=mats["A"], B=mats["B"], train_len=int(doc["sizes"]["train_len"]))
    raise InvalidInputError(f"unknown checkpoint arch {arch!r}")


def save(params, path, rng_seed=None, meta=None):
    with open(path, "w") as fh:
        json.dump(to_dict(params, rng_seed, meta), fh)


def load(path):
    with open(path) as fh:
        return from_dict(json.load(fh))


def load_document(path):
    with open(path) as fh:
        return json.load(fh)
