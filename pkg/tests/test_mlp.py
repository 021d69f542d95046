import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import relative_errors
from prospective.core import Dataset, TimedSample
from prospective.embeddings import EmbeddingSpec
from prospective.mlp import (
    MlpConfig,
    MlpLearner,
    Network,
    forward,
    gradient,
    load,
    loss_and_gradient,
    save,
    softmax,
    train_batched,
    train_online,
)
from prospective.processes import ProcessSpec, bayes_label, generate

NONE = EmbeddingSpec("none", 0)


def _blobs(n=200, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    return Dataset(np.arange(1, n + 1), X, y)


class TestGradient:
    @pytest.mark.parametrize("activation", ["relu", "tanh"])
    @pytest.mark.parametrize("sizes", [[3, 5, 2], [21, 64, 64, 2], [4, 8, 6, 3]])
    def test_matches_finite_differences(self, activation, sizes, rng):
        net = Network.init(sizes, activation, rng)
        Z = rng.normal(size=(16, sizes[0]))
        y = rng.integers(0, sizes[-1], 16)
        _, grads = loss_and_gradient(net, Z, y, weight_decay=1e-3)
        errs = relative_errors(net.params(), grads, lambda: loss_and_gradient(net, Z, y, 1e-3)[0], rng)
        assert errs.max() <= 1e-4

    def test_output_bias_on_symmetric_zero_batch(self):
        net = Network.init([2, 4, 2], "relu", np.random.default_rng(0))
        net.weights[-1][:] = 0.0
        net.biases[-1][:] = 0.0
        _, grads = loss_and_gradient(net, np.zeros((4, 2)), np.array([0, 1, 0, 1]))
        # softmax(0) = (0.5, 0.5), mean one-hot = (0.5, 0.5)
        np.testing.assert_allclose(grads[-1], [0.0, 0.0], atol=1e-15)
        _, grads = loss_and_gradient(net, np.zeros((4, 2)), np.array([0, 0, 0, 1]))
        np.testing.assert_allclose(grads[-1], [0.5 - 0.75, 0.5 - 0.25], atol=1e-15)

    def test_model_gradient_uses_features(self):
        model = train_batched(MlpConfig(epochs=0), EmbeddingSpec("fourier", 4), _blobs(20))
        grads = gradient(model, _blobs(8))
        assert [g.shape for g in grads] == [p.shape for p in model.net.params()]


class TestForward:
    def test_zero_weights_uniform(self):
        model = train_batched(MlpConfig(epochs=0), NONE, _blobs(10))
        for W, b in zip(model.net.weights, model.net.biases):
            W[:] = 0.0
            b[:] = 0.0
        pred = forward(model, 3, [0.2, -1.0])
        np.testing.assert_allclose(pred.proba, [0.5, 0.5])

    def test_dimension_mismatch(self):
        model = train_batched(MlpConfig(epochs=0), NONE, _blobs(10))
        with pytest.raises(ValueError):
            forward(model, 1, [1.0, 2.0, 3.0])

    @given(t1=st.integers(0, 10**6), t2=st.integers(0, 10**6))
    @settings(max_examples=25, deadline=None)
    def test_time_agnostic_without_embedding(self, t1, t2):
        model = _untrained_model()
        a, b = forward(model, t1, [0.3, 0.1]), forward(model, t2, [0.3, 0.1])
        np.testing.assert_array_equal(a.proba, b.proba)

    def test_softmax_stable(self):
        p = softmax(np.array([[1000.0, 0.0], [-1000.0, 0.0]]))
        assert np.all(np.isfinite(p))


_cache = {}


def _untrained_model():
    if "m" not in _cache:
        _cache["m"] = train_batched(MlpConfig(epochs=0), NONE, _blobs(10))
    return _cache["m"]


class TestTraining:
    def test_separable_fit(self):
        model = train_batched(MlpConfig(epochs=100), EmbeddingSpec("fourier", 4), _blobs(200))
        d = _blobs(200)
        assert (model.predict(d.t, d.X) == d.y).mean() >= 0.99

    def test_loss_history_non_increasing(self):
        model = train_batched(MlpConfig(epochs=40, lr=0.5), NONE, _blobs(100))
        assert np.all(np.diff(model.loss_history) <= 0)

    def test_duplicated_data_same_accuracy(self):
        d = _blobs(120, seed=3)
        dup = Dataset(np.repeat(d.t, 2), np.repeat(d.X, 2, axis=0), np.repeat(d.y, 2))
        cfg = MlpConfig(epochs=60)
        acc = (train_batched(cfg, NONE, d).predict(d.t, d.X) == d.y).mean()
        acc_dup = (train_batched(cfg, NONE, dup).predict(d.t, d.X) == d.y).mean()
        assert abs(acc - acc_dup) <= 0.02

    def test_nan_aborts(self):
        d = _blobs(50)
        bad = Dataset(d.t, d.X * 1e100, d.y)
        with np.errstate(all="ignore"), pytest.raises(FloatingPointError, match="learning rate"):
            train_batched(MlpConfig(lr=1e300, epochs=5, standardize=False), NONE, bad)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            train_batched(MlpConfig(), NONE, Dataset([], np.zeros((0, 1)), []))

    def test_deterministic(self):
        cfg = MlpConfig(epochs=10, seed=5)
        a, b = train_batched(cfg, EmbeddingSpec(), _blobs(60)), train_batched(cfg, EmbeddingSpec(), _blobs(60))
        for p, q in zip(a.net.params(), b.net.params()):
            assert p.tobytes() == q.tobytes()

    def test_periodic_matches_bayes_label(self):
        spec = ProcessSpec("periodic", seed=1)
        model = MlpLearner(MlpConfig(), EmbeddingSpec()).fit(generate(spec, t_max=300))
        rng = np.random.default_rng(0)
        t = rng.integers(1, 301, 400)
        x = rng.uniform(1, 2, 400) * rng.choice([-1, 1], 400)
        truth = np.array([bayes_label(spec, ti, xi) for ti, xi in zip(t, x)])
        assert (model.predict(t, x[:, None]) == truth).mean() >= 0.95


class TestOnline:
    def test_empty_stream_returns_initial_model(self):
        cfg = MlpConfig(seed=2)
        a = train_online(cfg, EmbeddingSpec(), [], input_dim=1)
        b = train_online(cfg, EmbeddingSpec(), [], input_dim=1)
        for p, q in zip(a.net.params(), b.net.params()):
            np.testing.assert_array_equal(p, q)

    def test_rejects_time_travel(self):
        stream = [TimedSample(5, [1.0], 1), TimedSample(4, [1.0], 1)]
        with pytest.raises(ValueError):
            train_online(MlpConfig(), EmbeddingSpec(), stream)

    def test_learns(self):
        d = _blobs(600)
        model = train_online(MlpConfig(lr=0.05), NONE, list(d))
        assert (model.predict(d.t, d.X) == d.y).mean() > 0.95


def test_save_load_round_trip():
    model = train_batched(MlpConfig(epochs=3), EmbeddingSpec("monomial", 3), _blobs(30))
    back = load(save(model))
    d = _blobs(30, seed=9)
    np.testing.assert_array_equal(back.predict_proba(d.t, d.X), model.predict_proba(d.t, d.X))
