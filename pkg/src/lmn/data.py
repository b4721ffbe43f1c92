"""
Piano-roll datasets, frame encoding, frame-level accuracy and synthetic
fixtures.

A dataset file is JSON ``{"train": [...], "valid": [...], "test": [...]}``
where every sequence is a list of frames and every frame a list of active
MIDI pitches in ``[21, 108]``.
"""
import csv
import json
import os
import pickle
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

LOWEST_PITCH = 21
HIGHEST_PITCH = 108
N_NOTES = HIGHEST_PITCH - LOWEST_PITCH + 1
SPLITS = ("train", "valid", "test")


class DatasetError(InvalidInputError):
    pass


@dataclass
class PianoRollDataset:
    splits: dict  # split name -> list of sequences; sequence -> list of frozenset pitches

    def __getitem__(self, split):
        return self.splits[split]

    def stats(self):
        rows = []
        for name in SPLITS:
            seqs = self.splits.get(name, [])
            rows.append({"split": name, "sequences": len(seqs),
                         "max_length": max((len(s) for s in seqs), default=0)})
        rows.append({"split": "total", "sequences": sum(r["sequences"] for r in rows),
                     "max_length": max(r["max_length"] for r in rows)})
        return rows

    def frames(self, split):
        return [to_frames(s) for s in self.splits.get(split, [])]

    def pairs(self, split):
        """Next-frame ``(inputs, targets)`` pairs for every sequence of a split."""
        return [next_frame_pair(f) for f in self.frames(split)]


def _validate(splits, source):
    out = {}
    for name in SPLITS:
        seqs = splits.get(name, [])
        parsed = []
        for q, seq in enumerate(seqs):
            if len(seq) < 2:
                raise DatasetError(f"{source}: {name}[{q}] has {len(seq)} frames, need at least 2")
            frames = []
            for t, frame in enumerate(seq):
                pitches = frozenset(int(n) for n in frame)
                bad = [n for n in pitches if not LOWEST_PITCH <= n <= HIGHEST_PITCH]
                if bad:
                    raise DatasetError(
                        f"{source}: {name}[{q}] frame {t} has pitch {bad[0]} outside "
                        f"[{LOWEST_PITCH}, {HIGHEST_PITCH}]")
                frames.append(pitches)
            parsed.append(frames)
        out[name] = parsed
    return out


def load_dataset(path):
    """
    Read a piano-roll dataset.  JSON is the native format; ``.pickle``/``.pkl``
    files with the same dict-of-splits layout (the layout of the commonly
    distributed polyphonic music pickles) are accepted too.
    """
    path = os.fspath(path)
    if path.endswith((".pickle", ".pkl")):
        with open(path, "rb") as fh:
            raw = pickle.load(fh)
    else:
        with open(path) as fh:
            text = fh.read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: expected an object with train/valid/test keys")
    return PianoRollDataset(_validate(raw, path))


def save_dataset(dataset, path):
    raw = {name: [[sorted(frame) for frame in seq] for seq in seqs]
           for name, seqs in dataset.splits.items()}
    with open(path, "w") as fh:
        json.dump(raw, fh)


def write_stats(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["split", "sequences", "max_length"])
        writer.writeheader()
        writer.writerows(dataset.stats())


def to_frames(sequence):
    """Binary ``(l, 88)`` matrix; column ``pitch - 21`` is set for active notes."""
    out = np.zeros((len(sequence), N_NOTES))
    for t, frame in enumerate(sequence):
        for n in frame:
            if not LOWEST_PITCH <= n <= HIGHEST_PITCH:
                raise DatasetError(f"pitch {n} outside [{LOWEST_PITCH}, {HIGHEST_PITCH}]")
            out[t, n - LOWEST_PITCH] = 1.0
    return out


def from_frames(frames):
    frames = np.asarray(frames)
    return [frozenset(int(i) + LOWEST_PITCH for i in np.flatnonzero(row)) for row in frames]


def next_frame_pair(frames):
    frames = np.asarray(frames, dtype=np.float64)
    return frames[:-1], frames[1:]


def frame_counts(predictions, targets, threshold=0.5):
    """Total ``(TP, FP, FN)`` over all frames of all sequences."""
    if isinstance(predictions, np.ndarray) and predictions.ndim == 2:
        predictions, targets = [predictions], [targets]
    if len(predictions) != len(targets):
        raise InvalidInputError("predictions and targets hold different numbers of sequences")
    tp = fp = fn = 0
    for pred, tgt in zip(predictions, targets):
        pred, tgt = np.asarray(pred), np.asarray(tgt)
        if pred.shape != tgt.shape:
            raise InvalidInputError(f"prediction shape {pred.shape} != target shape {tgt.shape}")
        on = pred >= threshold
        active = tgt > 0.5
        tp += int(np.sum(on & active))
        fp += int(np.sum(on & ~active))
        fn += int(np.sum(~on & active))
    return tp, fp, fn


def frame_accuracy(predictions, targets, threshold=0.5):
    """
    ``TP / (TP + FP + FN)`` with counts summed over all frames.

    Accepts one ``(l, n)`` array or lists of them.  Frames where both the
    prediction and the target are silent add nothing.  Returns 0 when there
    is nothing to count at all.
    """
    tp, fp, fn = frame_counts(predictions, targets, threshold)
    denom = tp + fp + fn
    return tp / denom if denom else 0.0


# synthetic fixtures ----------------------------------------------------------

def _split(items, n_valid, n_test):
    n_train = len(items) - n_valid - n_test
    return {"train": items[:n_train], "valid": items[n_train:n_train + n_valid],
            "test": items[n_train + n_valid:]}


def make_synthetic(kind, n_sequences=20, length=30, dim=8, seed=0, delay=2, rank=3,
                   density=0.5, n_valid=None, n_test=None, vary_length=False):
    """
    Deterministic synthetic data, split into train/valid/test lists of
    ``(inputs, targets)`` pairs.

    ``random-binary``
        next-frame prediction on independent Bernoulli(density) frames.
    ``delayed-copy``
        random binary inputs, targets equal to the inputs ``delay`` steps
        earlier (zeros before that).
    ``low-rank``
        real-valued sequences that are scaled prefixes of a single random
        motif of length ``rank``; their stacked data matrix has rank exactly
        ``rank``.  Targets are next-step inputs.
    """
    rng = np.random.default_rng(seed)
    if n_valid is None:
        n_valid = max(1, n_sequences // 5)
    if n_test is None:
        n_test = max(1, n_sequences // 5)
    if n_sequences - n_valid - n_test < 1:
        raise InvalidInputError("not enough sequences for a train split")

    def seq_len():
        return int(rng.integers(max(2, length // 2), length + 1)) if vary_length else length

    items = []
    if kind == "random-binary":
        for _ in range(n_sequences):
            frames = (rng.random((seq_len() + 1, dim)) < density).astype(float)
            items.append(next_frame_pair(frames))
    elif kind == "delayed-copy":
        for _ in range(n_sequences):
            x = (rng.random((seq_len(), dim)) < density).astype(float)
            t = np.zeros_like(x)
            if delay < len(x):
                t[delay:] = x[:len(x) - delay]
            items.append((x, t))
    elif kind == "low-rank":
        motif = rng.normal(size=(rank + 1, dim))
        lengths = rng.integers(1, rank + 1, size=n_sequences)
        lengths[0] = rank
        for n in lengths:
            scale = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
            seq = scale * motif[:n + 1]
            items.append((seq[:-1], seq[1:]))
    else:
        raise InvalidInputError(f"unknown synthetic kind {kind!r}")
    return _split(items, n_valid, n_test)


def inputs_of(pairs):
    return [x for x, _ in pairs]
