"""Monte-Carlo prospective/instantaneous risk and learning curves."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Dataset, Hypothesis, WeightingScheme, zero_one_loss
from .processes import ProcessSpec, bayes_label, bayes_prospective_risk, rollout, simulate, true_labels

CHANCE = 0.5


def _future_losses(h: Hypothesis, spec: ProcessSpec, t: int, horizon: int, n_mc: int, seed, chain_state):
    rng = np.random.default_rng(seed)
    times, X, y = rollout(spec, t, horizon, n_mc, rng, chain_state)
    T = np.broadcast_to(times, y.shape).ravel()
    pred = np.asarray(h.predict(T, X.reshape(len(T), -1)))
    return zero_one_loss(pred, y.ravel()).reshape(y.shape)


def prospective_risk(
    h: Hypothesis,
    spec: ProcessSpec,
    t: int,
    scheme: WeightingScheme = WeightingScheme(),
    n_mc: int = 100,
    seed=0,
    chain_state=None,
    return_stderr: bool = False,
):
    """Average weighted future loss over ``n_mc`` futures drawn after time ``t``.

    Each future has one sample per step. For hhmm the futures continue from
    ``chain_state`` (the generator's hidden state at ``t``).
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    losses = _future_losses(h, spec, t, scheme.horizon, n_mc, seed, chain_state)
    per_future = losses @ scheme.vector()
    risk = float(per_future.mean())
    if return_stderr:
        se = float(per_future.std(ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else float("nan")
        return risk, se
    return risk


def instantaneous_risk(h: Hypothesis, spec: ProcessSpec, t: int, n_mc: int = 100, seed=0, chain_state=None) -> float:
    """Expected loss at the single next step ``t + 1``."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    losses = _future_losses(h, spec, t, 1, n_mc, seed, chain_state)
    return float(losses.mean())


def bayes_risk(spec: ProcessSpec, t: int, scheme: WeightingScheme = WeightingScheme(), chain_state=None) -> float:
    return bayes_prospective_risk(spec, t, scheme, chain_state)


# -- reference hypotheses ------------------------------------------------------


@dataclass
class OracleHypothesis:
    """Predicts the ground-truth label; for hhmm it needs the hidden task at each time."""

    spec: ProcessSpec
    task_of: Callable[[np.ndarray], np.ndarray] | None = None

    def predict(self, t, X):
        X = np.asarray(X, dtype=float)
        tasks = None if self.task_of is None else self.task_of(np.asarray(t))
        return true_labels(self.spec, t, X[:, : 2 if self.spec.kind == "hhmm" else 1], tasks)


@dataclass
class RandomHypothesis:
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)

    def predict(self, t, X):
        return self._rng.integers(0, self.n_classes, len(np.atleast_1d(t)))


@dataclass
class ConstantHypothesis:
    label: int = 1

    def predict(self, t, X):
        return np.full(len(np.atleast_1d(t)), self.label)


@dataclass
class BayesHypothesis:
    """Pointwise Bayes predictor for hhmm given the chain state at ``t0``."""

    spec: ProcessSpec
    t0: int
    chain_state: tuple

    def predict(self, t, X):
        from .processes import task_marginals

        t = np.asarray(t)
        uniq, inv = np.unique(t, return_inverse=True)
        probs = task_marginals(self.spec, self.t0, self.chain_state, uniq)[inv]
        p1 = np.einsum("nk,kn->n", probs, self.spec.hhmm.tables[:, _quadrants(X)].astype(float))
        return (p1 > 0.5).astype(np.int64)


def _quadrants(X):
    from .processes import quadrant

    return quadrant(np.asarray(X, dtype=float)[:, :2])


# -- learning curves -----------------------------------------------------------


@dataclass
class RiskCurve:
    learner: str
    seed: int
    spec_hash: str
    t: list = field(default_factory=list)
    inst_risk: list = field(default_factory=list)
    prosp_risk: list = field(default_factory=list)

    def add(self, t: int, inst: float, prosp: float) -> None:
        if self.t and t <= self.t[-1]:
            raise ValueError("curve times must be strictly increasing")
        self.t.append(int(t))
        self.inst_risk.append(float(inst))
        self.prosp_risk.append(float(prosp))


def spec_hash(spec: ProcessSpec) -> str:
    return hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()[:12]


def _fmt(v: float) -> str:
    return "%.10g" % v


def curves_to_csv(curves: Sequence[RiskCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["learner", "seed", "t", "inst_risk", "prosp_risk"])
    for c in sorted(curves, key=lambda c: (c.learner, c.seed)):
        for t, i, p in zip(c.t, c.inst_risk, c.prosp_risk):
            w.writerow([c.learner, c.seed, t, _fmt(i), _fmt(p)])
    return buf.getvalue()


def read_curves_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        {"learner": r["learner"], "seed": int(r["seed"]), "t": int(r["t"]),
         "inst_risk": float(r["inst_risk"]), "prosp_risk": float(r["prosp_risk"])}
        for r in rows
    ]


def summarize(rows: list[dict], column: str = "prosp_risk") -> list[dict]:
    """Per (learner, t): mean and standard error across seeds."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["learner"], r["t"]), []).append(r[column])
    out = []
    for (learner, t), vals in sorted(groups.items()):
        v = np.asarray(vals, dtype=float)
        se = float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
        out.append({"learner": learner, "t": t, "n": len(v), "mean": float(v.mean()), "stderr": se})
    return out


def summary_to_csv(curves: Sequence[RiskCurve]) -> str:
    rows = read_curves_csv(curves_to_csv(curves))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["learner", "t", "n", "inst_mean", "inst_stderr", "prosp_mean", "prosp_stderr"])
    inst = {(r["learner"], r["t"]): r for r in summarize(rows, "inst_risk")}
    for r in summarize(rows, "prosp_risk"):
        i = inst[(r["learner"], r["t"])]
        w.writerow([r["learner"], r["t"], r["n"], _fmt(i["mean"]), _fmt(i["stderr"]), _fmt(r["mean"]), _fmt(r["stderr"])])
    return buf.getvalue()


@dataclass(frozen=True)
class CurveTask:
    """One (learner, seed) cell of a learning-curve sweep."""

    name: str
    learner: object  # BatchLearner or OnlineLearner
    spec: ProcessSpec
    schedule: str
    eval_times: tuple
    scheme: WeightingScheme
    n_mc: int
    seed: int


def run_curve(task: CurveTask) -> RiskCurve:
    """Train (from scratch, or by streaming for online learners) and evaluate at each time."""
    spec = task.spec
    sim = simulate(spec, task.schedule, max(task.eval_times))
    curve = RiskCurve(task.name, task.seed, spec_hash(spec))
    online = getattr(task.learner, "online", False)
    state = task.learner.start(spec.dim) if online else None
    prev_t = 0
    for t in task.eval_times:
        if online:
            state.update_many(sim.data.up_to(t).after(prev_t))
            h = state.model
        else:
            h = task.learner.fit(sim.data.up_to(t))
        chain = sim.state_at(t)["chain_state"]
        eval_seed = [task.seed, t, 7]
        inst = instantaneous_risk(h, spec, t, task.n_mc, eval_seed, chain)
        prosp = prospective_risk(h, spec, t, task.scheme, task.n_mc, eval_seed, chain)
        curve.add(t, inst, prosp)
        prev_t = t
    return curve


def learning_curve(
    learner_factory: Callable[[int], object],
    spec: ProcessSpec,
    eval_times: Sequence[int],
    scheme: WeightingScheme = WeightingScheme(),
    seeds: Sequence[int] = (0,),
    schedule: str = "homogeneous",
    n_mc: int = 100,
    name: str = "learner",
    workers: int = 1,
) -> list[RiskCurve]:
    """One :class:`RiskCurve` per seed; the process seed is replaced by each run seed."""
    if list(eval_times) != sorted(set(eval_times)):
        raise ValueError("eval_times must be strictly increasing")
    from dataclasses import replace

    tasks = [
        CurveTask(name, learner_factory(s), replace(spec, seed=s), schedule, tuple(eval_times), scheme, n_mc, s)
        for s in seeds
    ]
    return run_tasks(run_curve, tasks, workers)


def run_tasks(fn, tasks: list, workers: int = 1) -> list:
    """Map ``fn`` over ``tasks``, optionally in a process pool; order is preserved."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    import multiprocessing as mp

    with mp.get_context("spawn").Pool(workers) as pool:
        return pool.map(fn, tasks)
