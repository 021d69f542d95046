from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brute import enumerated_task_probs
from prospective.core import WeightingScheme
from prospective.embeddings import EmbeddingSpec
from prospective.evaluation import (
    BayesHypothesis,
    ConstantHypothesis,
    OracleHypothesis,
    RandomHypothesis,
    RiskCurve,
    bayes_risk,
    curves_to_csv,
    instantaneous_risk,
    learning_curve,
    prospective_risk,
    read_curves_csv,
    run_tasks,
    summarize,
    summary_to_csv,
)
from prospective.mlp import MlpConfig, MlpLearner
from prospective.processes import ProcessSpec, generate, simulate


@dataclass(frozen=True)
class Fixed:
    """A learner that ignores its data."""

    h: object

    def fit(self, data):
        return self.h


class TestProspectiveRisk:
    @pytest.mark.parametrize("kind", ["periodic", "linear"])
    def test_oracle_is_zero(self, kind):
        spec = ProcessSpec(kind)
        assert prospective_risk(OracleHypothesis(spec), spec, 37, n_mc=50) == 0.0
        assert instantaneous_risk(OracleHypothesis(spec), spec, 37, n_mc=50) == 0.0

    def test_random_is_chance(self):
        n_mc = 100
        r = prospective_risk(RandomHypothesis(seed=1), ProcessSpec("periodic"), 10, n_mc=n_mc)
        assert abs(r - 0.5) <= 2 / np.sqrt(n_mc)
        r = instantaneous_risk(RandomHypothesis(seed=2), ProcessSpec("periodic"), 10, n_mc=400)
        assert abs(r - 0.5) <= 2 / np.sqrt(400)

    @pytest.mark.parametrize("t,chain", [(0, (0, 0)), (14, (1, 0))])
    def test_constant_on_hhmm_matches_enumeration(self, t, chain):
        spec = ProcessSpec("hhmm")
        scheme = WeightingScheme(horizon=12)
        task_p = enumerated_task_probs(spec, t, chain, 12)
        wrong = task_p @ (1 - spec.hhmm.tables) @ spec.hhmm.quadrant_probs()
        r, se = prospective_risk(ConstantHypothesis(1), spec, t, scheme, 4000, seed=3, chain_state=chain,
                                 return_stderr=True)
        assert abs(r - wrong.mean()) <= 3 * se

    def test_bayes_predictor_attains_bayes_risk(self):
        spec = ProcessSpec("hhmm")
        chain = (1, 0)
        h = BayesHypothesis(spec, 30, chain)
        r, se = prospective_risk(h, spec, 30, n_mc=400, seed=5, chain_state=chain, return_stderr=True)
        assert abs(r - bayes_risk(spec, 30, chain_state=chain)) <= 3 * se

    def test_ftl_after_switch(self):
        # trained on tasks 1, 2, 1 (majority task 1); step 31 starts task 2
        spec = ProcessSpec("periodic", seed=4)
        h = MlpLearner(MlpConfig(epochs=100), EmbeddingSpec("none", 0)).fit(generate(spec, t_max=30))
        assert instantaneous_risk(h, spec, 30, n_mc=200) >= 0.5

    def test_stderr_scales_with_n_mc(self):
        spec = ProcessSpec("hhmm")
        h = ConstantHypothesis(0)
        spread = []
        for n_mc in (50, 100):
            est = [prospective_risk(h, spec, 0, WeightingScheme(horizon=20), n_mc, seed=s) for s in range(300)]
            spread.append(np.std(est, ddof=1))
        assert spread[0] / spread[1] == pytest.approx(np.sqrt(2), rel=0.2)

    @given(label=st.integers(0, 1), kind=st.sampled_from(["periodic", "linear", "hhmm"]), t=st.integers(0, 500))
    @settings(max_examples=20, deadline=None)
    def test_bounds(self, label, kind, t):
        r = prospective_risk(ConstantHypothesis(label), ProcessSpec(kind), t, WeightingScheme(horizon=30), n_mc=5)
        assert 0.0 <= r <= 1.0

    def test_rejects_zero_mc(self):
        with pytest.raises(ValueError):
            prospective_risk(ConstantHypothesis(), ProcessSpec(), 1, n_mc=0)


class TestLearningCurve:
    def test_data_ignoring_learner_is_flat(self):
        spec = ProcessSpec("periodic")
        curves = learning_curve(lambda s: Fixed(OracleHypothesis(spec)), spec, [10, 20, 40], seeds=(0, 1), n_mc=10)
        assert [c.prosp_risk for c in curves] == [[0.0] * 3] * 2
        curves = learning_curve(lambda s: Fixed(ConstantHypothesis(1)), spec, [10, 20, 40], n_mc=200)
        assert np.allclose(curves[0].prosp_risk, 0.5, atol=0.05)

    def test_times_must_increase(self):
        with pytest.raises(ValueError):
            learning_curve(lambda s: Fixed(ConstantHypothesis()), ProcessSpec(), [20, 10])

    def test_curve_rejects_out_of_order(self):
        c = RiskCurve("x", 0, "h")
        c.add(5, 0.1, 0.2)
        with pytest.raises(ValueError):
            c.add(5, 0.1, 0.2)

    def test_parallel_equals_serial(self):
        spec = ProcessSpec("periodic")
        factory = lambda s: MlpLearner(MlpConfig(epochs=5, seed=s), EmbeddingSpec())  # noqa: E731
        serial = learning_curve(factory, spec, [20, 40], seeds=(0, 1), n_mc=10)
        parallel = learning_curve(factory, spec, [20, 40], seeds=(0, 1), n_mc=10, workers=2)
        assert curves_to_csv(serial) == curves_to_csv(parallel)


class TestCsv:
    def test_round_trip_and_summary(self):
        curves = []
        for seed, vals in enumerate([[0.2, 0.1], [0.4, 0.3], [0.3, 0.2]]):
            c = RiskCurve("p-mlp", seed, "abc")
            for t, v in zip((10, 20), vals):
                c.add(t, v, v)
            curves.append(c)
        rows = read_curves_csv(curves_to_csv(curves))
        assert len(rows) == 6
        s = summarize(rows)
        assert s[0]["mean"] == pytest.approx(0.3)
        assert s[0]["stderr"] == pytest.approx(np.std([0.2, 0.4, 0.3], ddof=1) / np.sqrt(3))
        assert summary_to_csv(curves).splitlines()[0].startswith("learner,t,n,")

    def test_run_tasks_preserves_order(self):
        assert run_tasks(abs, [-3, 1, -2]) == [3, 1, 2]


def test_simulation_chain_trace_matches_tasks():
    sim = simulate(ProcessSpec("hhmm", seed=8), t_max=50)
    for t in range(1, 51):
        c = ((t - 1) // 10) % 2
        assert sim.tasks[t - 1] == 2 * c + sim.state_at(t)["chain_state"][c] + 1
