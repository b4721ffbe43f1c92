import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmn import model
from lmn.errors import InvalidInputError, NumericError
from lmn.model import LMNParams, RNNParams, UnfoldedParams


def sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def ones(*shape):
    return np.ones(shape)


def zero_lmn(a=3, p=4, m=5, o=2, variant="B"):
    return LMNParams(np.zeros((p, a)), np.zeros((p, m)), np.zeros((m, p)), np.zeros((m, m)),
                     np.zeros((o, m if variant == "B" else p)), variant)


# activations --------------------------------------------------------------

def test_activation_values():
    assert model.tanh(0.0) == 0.0
    assert model.sigmoid(np.array(0.0)) == 0.5
    assert model.selu(np.array(0.0)) == 0.0
    assert model.selu(np.array(-1e3)) == pytest.approx(-model.SELU_LAMBDA * model.SELU_ALPHA)
    assert model.selu(np.array(2.0)) == pytest.approx(2 * model.SELU_LAMBDA)


def test_sigmoid_is_stable():
    out = model.sigmoid(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0])


@pytest.mark.parametrize("name", ["tanh", "sigmoid", "selu"])
def test_derivatives_match_central_differences(name):
    f, df = model.ACTIVATIONS[name]
    x = np.array([-3.0, -1.2, -0.4, 0.3, 0.9, 2.5])
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2 * h)
    np.testing.assert_allclose(df(x), fd, rtol=1e-6)


# LMN -------------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["A", "B"])
def test_zero_weights(variant, rng):
    tr = model.lmn_forward(zero_lmn(variant=variant), rng.normal(size=(6, 3)))
    assert not tr.h.any() and not tr.hm.any()
    np.testing.assert_array_equal(tr.y, 0.5)


def test_scalar_hand_case():
    params = LMNParams(ones(1, 1), ones(1, 1), ones(1, 1), ones(1, 1), ones(1, 1), "B")
    tr = model.lmn_forward(params, [[1.0], [0.0]])
    h1 = math.tanh(1.0)
    h2 = math.tanh(math.tanh(1.0))
    hm2 = h2 + h1
    np.testing.assert_allclose(tr.h[:, 0], [h1, h2], rtol=1e-15)
    np.testing.assert_allclose(tr.hm[:, 0], [h1, hm2], rtol=1e-15)
    assert tr.y[1, 0] == pytest.approx(sig(hm2), rel=1e-15)


def test_memory_update_is_linear(rng):
    params = model.init_lmn(3, 4, 5, 2, seed=1)
    h = rng.normal(size=4)
    hm = rng.normal(size=5)
    step = lambda prev: params.W_hm @ h + params.W_mm @ prev  # noqa: E731
    np.testing.assert_allclose(step(2 * hm) - params.W_hm @ h, 2 * (step(hm) - params.W_hm @ h), rtol=1e-15)


def test_memory_superposition(rng):
    # with the functional outputs injected, hm_l is linear in (hm_0, h_1..l)
    params = model.init_lmn(3, 4, 5, 2, seed=2)

    def run(hm0, hs):
        hm = hm0
        for h in hs:
            hm = params.W_hm @ h + params.W_mm @ hm
        return hm

    a0, b0 = rng.normal(size=5), rng.normal(size=5)
    ha, hb = rng.normal(size=(7, 4)), rng.normal(size=(7, 4))
    np.testing.assert_allclose(run(2 * a0 - b0, 2 * ha - hb), 2 * run(a0, ha) - run(b0, hb), atol=1e-12)


def test_variant_a_without_feedback_is_feedforward(rng):
    params = model.init_lmn(3, 4, 5, 2, variant="A", seed=3)
    params = params.with_arrays({"W_mh": np.zeros_like(params.W_mh)})
    seq = rng.normal(size=(8, 3))
    perm = rng.permutation(8)
    y = model.lmn_forward(params, seq).y
    np.testing.assert_allclose(model.lmn_forward(params, seq[perm]).y, y[perm], atol=1e-15)


def test_shapes_validated():
    with pytest.raises(InvalidInputError):
        LMNParams(ones(4, 3), ones(4, 5), ones(5, 4), ones(5, 5), ones(2, 4), "B")
    with pytest.raises(InvalidInputError):
        LMNParams(ones(4, 3), ones(4, 5), ones(5, 4), ones(5, 5), ones(2, 5), "C")
    with pytest.raises(InvalidInputError):
        model.lmn_forward(model.init_lmn(3, 4, 5, 2), np.zeros((4, 2)))


def test_non_finite_reports_timestep():
    params = LMNParams(ones(1, 1), ones(1, 1), ones(1, 1), 1e200 * ones(1, 1), ones(1, 1), "B")
    with pytest.raises(NumericError) as info:
        model.lmn_forward(params, np.ones((5, 1)))
    assert info.value.timestep is not None and info.value.timestep > 1


# unfolded and RNN ------------------------------------------------------------

def test_unfolded_hand_case():
    params = UnfoldedParams(ones(1, 1), ones(2, 1, 1), ones(3, 1, 1), "tanh")
    tr = model.unfolded_forward(params, [[1.0], [1.0]])
    h1 = math.tanh(1.0)
    h2 = math.tanh(1.0 + h1)
    np.testing.assert_allclose(tr.h[:, 0], [h1, h2], rtol=1e-15)
    assert tr.y[1, 0] == pytest.approx(sig(h2 + h1), rel=1e-15)


def test_unfolded_first_output_uses_only_first_state(rng):
    params = model.init_unfolded(3, 4, 2, k=3, seed=4)
    seq = rng.normal(size=(6, 3))
    tr = model.unfolded_forward(params, seq)
    np.testing.assert_allclose(tr.y[0], model.sigmoid(params.W_o[0] @ tr.h[0]), rtol=1e-15)
    np.testing.assert_allclose(tr.h[0], np.tanh(params.W_xh @ seq[0]), rtol=1e-15)


def test_unfolded_k1_equals_rnn(rng):
    u = model.init_unfolded(3, 4, 2, k=1, seed=5)
    u = u.with_arrays({"W_o": np.stack([u.W_o[0], np.zeros_like(u.W_o[1])])})
    r = RNNParams(u.W_xh, u.W_hh[0], u.W_o[0])
    seq = rng.normal(size=(9, 3))
    a, b = model.unfolded_forward(u, seq), model.rnn_forward(r, seq)
    np.testing.assert_allclose(a.h, b.h, atol=1e-15)
    np.testing.assert_allclose(a.y, b.y, atol=1e-15)


def test_unfolded_selu(rng):
    params = model.init_unfolded(3, 4, 2, k=2, hidden_activation="selu", seed=6)
    seq = rng.normal(size=(3, 3))
    tr = model.unfolded_forward(params, seq)
    np.testing.assert_allclose(tr.h[0], model.selu(params.W_xh @ seq[0]))
    with pytest.raises(InvalidInputError):
        model.init_unfolded(3, 4, 2, k=2, hidden_activation="relu")


def test_rnn_zero_weights(rng):
    tr = model.rnn_forward(RNNParams(np.zeros((4, 3)), np.zeros((4, 4)), np.zeros((2, 4))), rng.normal(size=(5, 3)))
    np.testing.assert_array_equal(tr.y, 0.5)


def test_rnn_scalar_hand_case():
    tr = model.rnn_forward(RNNParams(ones(1, 1), 0.5 * ones(1, 1), 2 * ones(1, 1)), [[1.0], [-1.0]])
    h1 = math.tanh(1.0)
    h2 = math.tanh(-1.0 + 0.5 * h1)
    np.testing.assert_allclose(tr.h[:, 0], [h1, h2], rtol=1e-15)
    np.testing.assert_allclose(tr.y[:, 0], [sig(2 * h1), sig(2 * h2)], rtol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.sampled_from(["lmn", "unfolded", "rnn"]), st.integers(0, 1000))
def test_trace_lengths(length, kind, seed):
    rng = np.random.default_rng(seed)
    params = {"lmn": model.init_lmn(3, 4, 5, 2, seed=seed),
              "unfolded": model.init_unfolded(3, 4, 2, k=3, seed=seed),
              "rnn": model.init_rnn(3, 4, 2, seed=seed)}[kind]
    tr = model.forward(params, rng.normal(size=(length, 3)))
    assert tr.h.shape == (length, 4) and tr.y.shape == (length, 2)
    if kind == "lmn":
        assert tr.hm.shape == (length, 5)


def test_init_is_seeded_and_bounded():
    a, b = model.init_lmn(6, 4, 5, 2, seed=7), model.init_lmn(6, 4, 5, 2, seed=7)
    for name in a.arrays():
        np.testing.assert_array_equal(a.arrays()[name], b.arrays()[name])
    assert np.abs(a.W_xh).max() <= 1 / math.sqrt(6)
    assert np.abs(a.W_mm).max() <= 1 / math.sqrt(5)


# parameter counts ------------------------------------------------------------

def test_parameter_counts():
    assert model.parameter_count("LSTM", 88, h=100) == 75200
    assert model.parameter_count("GRU", 88, h=100) == 56400
    assert model.parameter_count("LMN", 88, f=100, m=100) == 38800
    assert model.parameter_count("RNN", 88, h=100) == 18800


def test_parameter_count_errors():
    with pytest.raises(InvalidInputError):
        model.parameter_count("LMN", 88, h=100)
    with pytest.raises(InvalidInputError):
        model.parameter_count("LSTM", 0, h=100)
    with pytest.raises(InvalidInputError):
        model.parameter_count("TRANSFORMER", 88, h=100)


def test_lmn_core_count_matches_matrices():
    params = model.init_lmn(88, 30, 20, 88)
    core = params.n_params() - params.W_out.size
    assert core == model.parameter_count("LMN", 88, f=30, m=20)


def test_lmn_count_optimum_closed_form():
    # with h = f + m fixed the count is the concave quadratic
    # x h - x m + 2 h m - m^2, maximised at m = h - x / 2
    for x in (1, 10, 64, 88):
        for h in range(2, 65):
            counts = {m: model.parameter_count("LMN", x, f=h - m, m=m) for m in range(1, h)}
            best = max(counts, key=counts.get)
            unconstrained = min(max(h - x / 2, 1), h - 1)
            assert abs(best - unconstrained) <= 0.5
