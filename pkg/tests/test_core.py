import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prospective.core import (
    Dataset,
    FunctionHypothesis,
    Prediction,
    TimedSample,
    WeightingScheme,
    per_step_mean,
    prospective_loss,
    weights,
    zero_one_loss,
)


class TestZeroOneLoss:
    @pytest.mark.parametrize("pred,y,expected", [(1, 1, 0.0), (0, 1, 1.0), (1, 0, 1.0)])
    def test_table(self, pred, y, expected):
        assert zero_one_loss(Prediction(pred), y) == expected
        assert zero_one_loss(pred, y) == expected

    def test_vectorised(self):
        np.testing.assert_array_equal(zero_one_loss(np.array([0, 1, 1]), np.array([0, 0, 1])), [0, 1, 0])


class TestWeights:
    def test_uniform(self):
        s = WeightingScheme("uniform", horizon=10)
        assert weights(s, 3) == pytest.approx(0.1)
        assert weights(s, 11) == 0.0

    def test_geometric_truncated(self):
        s = WeightingScheme("geometric", horizon=3, decay=0.5)
        assert weights(s, 1) == pytest.approx(4 / 7, abs=1e-15)
        assert weights(s, 3) == pytest.approx(1 / 7, abs=1e-15)

    def test_offset_zero_rejected(self):
        with pytest.raises(ValueError):
            weights(WeightingScheme(), 0)

    @pytest.mark.parametrize("kwargs", [{"kind": "flat"}, {"horizon": 0}, {"kind": "geometric", "decay": 1.0}])
    def test_invalid_schemes(self, kwargs):
        with pytest.raises(ValueError):
            WeightingScheme(**kwargs)

    @given(
        kind=st.sampled_from(["uniform", "geometric"]),
        horizon=st.integers(1, 400),
        decay=st.floats(0.01, 0.99),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_normalised(self, kind, horizon, decay):
        s = WeightingScheme(kind, horizon, decay)
        w = np.array([weights(s, i) for i in range(1, horizon + 3)])
        assert np.all(np.diff(w) <= 1e-18)
        assert abs(w.sum() - 1.0) <= 1e-12


def _future(t, steps, per_step=1, rng=None):
    rng = rng or np.random.default_rng(0)
    times = np.repeat(np.arange(t + 1, t + steps + 1), per_step)
    X = rng.uniform(-1, 1, (len(times), 1))
    return Dataset(times, X, (X[:, 0] > 0).astype(int))


class TestProspectiveLoss:
    perfect = FunctionHypothesis(lambda t, X: (X[:, 0] > 0).astype(int))
    wrong = FunctionHypothesis(lambda t, X: (X[:, 0] <= 0).astype(int))

    def test_perfect_is_zero(self):
        assert prospective_loss(self.perfect, _future(5, 30), 5, WeightingScheme(horizon=20)) == 0.0

    def test_constant_wrong_is_one(self):
        assert prospective_loss(self.wrong, _future(5, 20), 5, WeightingScheme(horizon=20)) == pytest.approx(1.0)

    def test_wrong_only_at_next_step(self):
        h = FunctionHypothesis(lambda t, X: np.where(t == 8, 1 - (X[:, 0] > 0), X[:, 0] > 0).astype(int))
        assert prospective_loss(h, _future(7, 10), 7, WeightingScheme(horizon=10)) == pytest.approx(0.1)

    def test_past_sample_rejected(self):
        with pytest.raises(ValueError):
            prospective_loss(self.perfect, _future(5, 3), 6, WeightingScheme())

    def test_empty_future(self):
        empty = Dataset(np.zeros(0, int), np.zeros((0, 1)), np.zeros(0))
        assert prospective_loss(self.perfect, empty, 0, WeightingScheme()) == 0.0

    def test_multiple_samples_per_step_are_averaged(self):
        # step t+1 has one wrong and one right sample: its loss is 0.5 regardless of count
        data = Dataset([1, 1, 2], [[0.5], [-0.5], [0.5]], [1, 0, 1])
        h = FunctionHypothesis(lambda t, X: np.ones(len(t), int))
        assert prospective_loss(h, data, 0, WeightingScheme(horizon=2)) == pytest.approx(0.25)

    @given(c=st.floats(0.0, 5.0), seed=st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_linear_in_losses(self, c, seed):
        data = _future(0, 15, per_step=2, rng=np.random.default_rng(seed))
        h = FunctionHypothesis(lambda t, X: np.zeros(len(t), int))
        base = prospective_loss(h, data, 0, WeightingScheme(horizon=12))
        scaled = prospective_loss(h, data, 0, WeightingScheme(horizon=12), loss=lambda p, y: c * zero_one_loss(p, y))
        assert scaled == pytest.approx(c * base, abs=1e-12)


class TestDataset:
    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            Dataset([2, 1], [[0.0], [1.0]], [0, 1])

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            Dataset([1], [[np.nan]], [0])
        with pytest.raises(ValueError):
            TimedSample(1, [np.inf], 0)

    def test_split_and_iterate(self):
        d = Dataset([1, 2, 2, 5], np.arange(4.0)[:, None], [0, 1, 0, 1])
        assert len(d.up_to(2)) == 3 and len(d.after(2)) == 1
        again = Dataset.from_samples(list(d))
        np.testing.assert_array_equal(again.X, d.X)

    def test_per_step_mean(self):
        steps, means = per_step_mean(np.array([1, 1, 3]), np.array([1.0, 0.0, 1.0]))
        np.testing.assert_array_equal(steps, [1, 3])
        np.testing.assert_array_equal(means, [0.5, 1.0])

    def test_prediction_validates_proba(self):
        with pytest.raises(ValueError):
            Prediction(1, np.array([0.7, 0.7]))
