import json

import numpy as np
import pytest

from lmn import checkpoint, model, seqae
from lmn.errors import InvalidInputError

from conftest import random_batch


def same(a, b):
    assert type(a) is type(b)
    for name, w in a.arrays().items():
        np.testing.assert_array_equal(b.arrays()[name], w)


@pytest.mark.parametrize("make", [
    lambda: model.init_lmn(5, 4, 3, 2, variant="B", seed=1),
    lambda: model.init_lmn(5, 4, 3, 2, variant="A", seed=2),
    lambda: model.init_unfolded(5, 4, 2, k=3, hidden_activation="selu", seed=3),
    lambda: model.init_rnn(5, 4, 2, seed=4),
])
def test_exact_round_trip(tmp_path, make):
    params = make()
    path = tmp_path / "c.json"
    checkpoint.save(params, path, rng_seed=7, meta={"note": "x"})
    back = checkpoint.load(path)
    same(params, back)
    if isinstance(params, model.LMNParams):
        assert back.variant == params.variant
    if isinstance(params, model.UnfoldedParams):
        assert back.hidden_activation == "selu"
    doc = checkpoint.load_document(path)
    assert doc["format_version"] == 1 and doc["rng_seed"] == 7 and doc["meta"] == {"note": "x"}


def test_autoencoder_round_trip(tmp_path, rng):
    ae = seqae.fit(random_batch(rng))
    path = tmp_path / "ae.json"
    checkpoint.save(ae, path)
    back = checkpoint.load(path)
    np.testing.assert_array_equal(back.A, ae.A)
    np.testing.assert_array_equal(back.B, ae.B)
    assert back.train_len == ae.train_len


def test_awkward_floats_survive(tmp_path):
    w = np.array([[0.1, 1e-300, -2.5e300, 1 / 3]])
    params = model.RNNParams(w.reshape(4, 1), np.eye(4) / 7, np.ones((1, 4)) * np.pi)
    checkpoint.save(params, tmp_path / "c.json")
    same(params, checkpoint.load(tmp_path / "c.json"))


def test_unfolded_matrix_names():
    doc = checkpoint.to_dict(model.init_unfolded(2, 3, 1, k=2))
    assert set(doc["matrices"]) == {"W_xh", "W_hh_1", "W_hh_2", "W_o_0", "W_o_1", "W_o_2"}


def test_rejects_bad_documents():
    doc = checkpoint.to_dict(model.init_rnn(2, 3, 1))
    with pytest.raises(InvalidInputError):
        checkpoint.from_dict(dict(doc, format_version=2))
    with pytest.raises(InvalidInputError):
        checkpoint.from_dict(dict(doc, arch="gru"))
    broken = json.loads(json.dumps(doc))
    broken["matrices"]["W_o"]["data"].pop()
    with pytest.raises(InvalidInputError):
        checkpoint.from_dict(broken)
    with pytest.raises(InvalidInputError):
        checkpoint.to_dict("not a model")
