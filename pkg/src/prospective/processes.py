"""Synthetic stochastic processes with queryable ground truth.

Three processes are provided:

``periodic``
    Inputs uniform on [-2, -1] u [1, 2]. Task 1 labels by the sign of x,
    task 2 by its negation; tasks alternate every ``switch_period`` steps.
``linear``
    Inputs uniform on [eps*t + 10, eps*t + 11] u [eps*t - 11, eps*t - 10],
    label 1 below the moving boundary eps*t.
``hhmm``
    Four tasks on 2-D Gaussian-blob inputs. Chain 0 moves among tasks {1, 2},
    chain 1 among {3, 4}; the governing chain alternates every
    ``switch_period`` steps and an inactive chain keeps its state.

Time starts at 1 and block k covers times k*P+1 .. (k+1)*P.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .core import Dataset, TimedSample, WeightingScheme

KINDS = ("periodic", "linear", "hhmm")
BASE_DIM = {"periodic": 1, "linear": 1, "hhmm": 2}

# quadrant index q = 2*[x0 < 0] + [x1 < 0]: (+,+)=0, (+,-)=1, (-,+)=2, (-,-)=3
DEFAULT_TABLES = (
    (1, 1, 0, 0),  # task 1: x0 > 0
    (1, 0, 0, 1),  # task 2: x0 * x1 > 0
    (0, 0, 1, 1),  # task 3: flip of task 1
    (0, 1, 1, 0),  # task 4: flip of task 2
)


@dataclass(frozen=True)
class HhmmConfig:
    transitions: tuple = (((0.9, 0.1), (0.1, 0.9)), ((0.9, 0.1), (0.1, 0.9)))
    initial: tuple = (0, 0)
    means: tuple = ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0))
    sigma: float = 0.3
    label_tables: tuple = DEFAULT_TABLES

    def __post_init__(self):
        T = np.asarray(self.transitions, dtype=float)
        if T.shape != (2, 2, 2):
            raise ValueError("need two 2x2 transition matrices")
        if np.any(T < 0) or np.any(np.abs(T.sum(axis=2) - 1.0) > 1e-12):
            raise ValueError("transition matrices must be row-stochastic")
        if np.asarray(self.label_tables).shape != (4, 4):
            raise ValueError("label_tables must be 4 tasks x 4 quadrants")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if any(i not in (0, 1) for i in self.initial):
            raise ValueError("initial chain states must be 0 or 1")

    @property
    def T(self) -> np.ndarray:
        return np.asarray(self.transitions, dtype=float)

    @property
    def tables(self) -> np.ndarray:
        return np.asarray(self.label_tables, dtype=np.int64)

    def quadrant_probs(self) -> np.ndarray:
        """Probability of each sign quadrant under the input mixture."""
        m = np.asarray(self.means, dtype=float)
        pos0, pos1 = ndtr(m[:, 0] / self.sigma), ndtr(m[:, 1] / self.sigma)
        q = np.stack([pos0 * pos1, pos0 * (1 - pos1), (1 - pos0) * pos1, (1 - pos0) * (1 - pos1)], axis=1)
        return q.mean(axis=0)


@dataclass(frozen=True)
class ProcessSpec:
    kind: str = "periodic"
    switch_period: int = 10
    epsilon: float = 0.01
    noise_dims: int = 0
    seed: int = 0
    hhmm: HhmmConfig = field(default_factory=HhmmConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.switch_period < 1:
            raise ValueError("switch_period must be >= 1")
        if self.kind == "linear" and self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.noise_dims < 0:
            raise ValueError("noise_dims must be >= 0")

    @property
    def dim(self) -> int:
        return BASE_DIM[self.kind] + self.noise_dims

    def block(self, t):
        return (np.asarray(t) - 1) // self.switch_period

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hhmm"] = json.loads(json.dumps(d["hhmm"]))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessSpec":
        d = dict(d)
        h = d.pop("hhmm", None)
        if h is not None:
            h = HhmmConfig(**{k: _tuplify(v) for k, v in h.items()})
            d["hhmm"] = h
        return cls(**d)


def _tuplify(v):
    return tuple(_tuplify(i) for i in v) if isinstance(v, list) else v


class ProcessState:
    """Stateful generator for one process; advance, then draw samples at ``t``."""

    def __init__(self, spec: ProcessSpec, rng: np.random.Generator | int | None = None):
        self.spec = spec
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(
            spec.seed if rng is None else rng
        )
        self.t = 0
        self.chain_state = list(spec.hhmm.initial)

    @property
    def active_chain(self) -> int:
        return int(self.spec.block(self.t) % 2)

    @property
    def task(self) -> int:
        """1-based task id of the current time step."""
        if self.t < 1:
            raise RuntimeError("advance() before asking for the task")
        if self.spec.kind == "periodic":
            return 1 + int(self.spec.block(self.t) % 2)
        if self.spec.kind == "linear":
            return self.t
        c = self.active_chain
        return 2 * c + self.chain_state[c] + 1

    def advance(self) -> None:
        self.t += 1
        if self.spec.kind == "hhmm" and (self.t - 1) % self.spec.switch_period != 0:
            c = self.active_chain
            row = self.spec.hhmm.T[c, self.chain_state[c]]
            self.chain_state[c] = int(self.rng.random() < row[1])

    def draw(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``n`` i.i.d. samples at the current time."""
        spec, rng, t = self.spec, self.rng, self.t
        if spec.kind == "periodic":
            x = rng.uniform(1.0, 2.0, n) * rng.choice([-1.0, 1.0], n)
            X = x[:, None]
        elif spec.kind == "linear":
            upper = rng.random(n) < 0.5
            u = rng.uniform(0.0, 1.0, n)
            base = spec.epsilon * t
            X = np.where(upper, base + 10 + u, base - 11 + u)[:, None]
        else:
            h = spec.hhmm
            blob = rng.integers(0, len(h.means), n)
            X = np.asarray(h.means, dtype=float)[blob] + h.sigma * rng.standard_normal((n, 2))
        y = true_labels(spec, np.full(n, t), X, tasks=np.full(n, self.task))
        if spec.noise_dims:
            X = np.hstack([X, rng.standard_normal((n, spec.noise_dims))])
        return X, y

    def snapshot(self) -> dict:
        return {"t": self.t, "chain_state": tuple(self.chain_state)}


def _check_kind(state: ProcessState, kind: str) -> None:
    if state.spec.kind != kind:
        raise ValueError(f"expected a {kind} process, got {state.spec.kind}")


def _one(state: ProcessState) -> TimedSample:
    X, y = state.draw(1)
    return TimedSample(state.t, X[0], int(y[0]))


def sample_periodic(state: ProcessState) -> TimedSample:
    _check_kind(state, "periodic")
    return _one(state)


def sample_linear(state: ProcessState) -> TimedSample:
    _check_kind(state, "linear")
    return _one(state)


def sample_hhmm(state: ProcessState) -> TimedSample:
    _check_kind(state, "hhmm")
    return _one(state)


def quadrant(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 2 * (X[:, 0] < 0) + (X[:, 1] < 0)


def true_labels(spec: ProcessSpec, t, X, tasks=None) -> np.ndarray:
    """Labels under the process rule. hhmm needs the 1-based ``tasks``."""
    t = np.asarray(t)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if spec.kind == "periodic":
        task2 = spec.block(t) % 2 == 1
        return ((X[:, 0] > 0) != task2).astype(np.int64)
    if spec.kind == "linear":
        return (X[:, 0] < spec.epsilon * t).astype(np.int64)
    if tasks is None:
        raise ValueError("hhmm labels depend on the hidden task")
    return spec.hhmm.tables[np.asarray(tasks) - 1, quadrant(X)]


def in_support(spec: ProcessSpec, t, X, tol: float = 1e-9) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    x = np.asarray(X, dtype=float).reshape(len(np.atleast_1d(t)), -1)[:, 0]
    if spec.kind == "periodic":
        return (np.abs(x) >= 1 - tol) & (np.abs(x) <= 2 + tol)
    if spec.kind == "linear":
        b = spec.epsilon * t
        up = (x >= b + 10 - tol) & (x <= b + 11 + tol)
        lo = (x >= b - 11 - tol) & (x <= b - 10 + tol)
        return up | lo
    return np.ones(len(x), dtype=bool)


def schedule_counts(schedule: str, t_max: int, seed=0, lam: float = 1.0) -> np.ndarray:
    """Samples received at each time 1..t_max."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if schedule == "homogeneous":
        return np.ones(t_max, dtype=np.int64)
    if schedule == "poisson":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return rng.poisson(lam, t_max).astype(np.int64)
    raise ValueError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class Simulation:
    """A generated dataset plus the hidden trace needed for conditioning."""

    spec: ProcessSpec
    data: Dataset
    tasks: np.ndarray  # task id at times 1..t_max
    chain_states: np.ndarray  # (t_max + 1, 2); row t = chain states after time t

    def state_at(self, t: int) -> dict:
        return {"t": t, "chain_state": tuple(int(c) for c in self.chain_states[t])}


def simulate(spec: ProcessSpec, schedule: str = "homogeneous", t_max: int = 100) -> Simulation:
    count_seq, sample_seq = np.random.SeedSequence(spec.seed).spawn(2)
    counts = schedule_counts(schedule, t_max, np.random.default_rng(count_seq))
    state = ProcessState(spec, np.random.default_rng(sample_seq))
    ts, xs, ys = [], [], []
    tasks = np.zeros(t_max, dtype=np.int64)
    chains = np.zeros((t_max + 1, 2), dtype=np.int64)
    chains[0] = state.chain_state
    for i in range(t_max):
        state.advance()
        tasks[i] = state.task
        chains[i + 1] = state.chain_state
        n = int(counts[i])
        if n:
            X, y = state.draw(n)
            ts.append(np.full(n, state.t))
            xs.append(X)
            ys.append(y)
    if ts:
        data = Dataset(np.concatenate(ts), np.vstack(xs), np.concatenate(ys))
    else:
        data = Dataset(np.zeros(0, np.int64), np.zeros((0, spec.dim)), np.zeros(0, np.int64))
    return Simulation(spec, data, tasks, chains)


def generate(spec: ProcessSpec, schedule: str = "homogeneous", t_max: int = 100) -> Dataset:
    return simulate(spec, schedule, t_max).data


# -- hidden-task bookkeeping for hhmm ------------------------------------------


def task_marginals(spec: ProcessSpec, t: int, chain_state, times) -> np.ndarray:
    """P(task at s = k) for each s in ``times`` (all > t), given chain states at ``t``.

    Returns shape ``(len(times), 4)``.
    """
    times = np.asarray(times, dtype=np.int64)
    T = spec.hhmm.T
    dist = [np.eye(2)[int(c)] for c in chain_state]
    out = np.zeros((len(times), 4))
    order = np.argsort(times)
    s_prev = t
    P = spec.switch_period
    for idx in order:
        s = times[idx]
        while s_prev < s:
            s_prev += 1
            c = int(((s_prev - 1) // P) % 2)
            if (s_prev - 1) % P != 0:
                dist[c] = dist[c] @ T[c]
        c = int(((s - 1) // P) % 2)
        out[idx, 2 * c : 2 * c + 2] = dist[c]
    return out


def bayes_label(spec: ProcessSpec, t: int, x, task_probs=None, chain_state=None) -> int:
    """Ground-truth label (periodic/linear) or the posterior-argmax label (hhmm).

    For hhmm pass either ``task_probs`` (length 4) or the ``chain_state`` at
    ``t``; without both, the prior predictive from the initial state is used.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec.kind in ("periodic", "linear"):
        if not in_support(spec, [t], x[None])[0]:
            raise ValueError(f"x={x[0]} is outside the support at t={t}")
        return int(true_labels(spec, [t], x[None])[0])
    if task_probs is None:
        if chain_state is not None:
            p = np.zeros(4)
            c = int(spec.block(t) % 2)
            p[2 * c + int(chain_state[c])] = 1.0
            task_probs = p
        else:
            task_probs = task_marginals(spec, 0, spec.hhmm.initial, [t])[0]
    p1 = float(np.asarray(task_probs) @ spec.hhmm.tables[:, quadrant(x[None])[0]])
    return int(p1 > 0.5)


class HhmmFilter:
    """Forward recursion over the joint (chain 0, chain 1) hidden state.

    Labels are deterministic given task and input, so an observation either
    keeps or rules out each joint state; ``eps`` softens that for robustness.
    """

    def __init__(self, spec: ProcessSpec, eps: float = 1e-6):
        if spec.kind != "hhmm":
            raise ValueError("filter only applies to hhmm processes")
        self.spec = spec
        self.eps = eps
        self.t = 0
        self.belief = np.zeros((2, 2))
        self.belief[spec.hhmm.initial] = 1.0

    def advance(self) -> None:
        self.t += 1
        P = self.spec.switch_period
        if (self.t - 1) % P:
            T = self.spec.hhmm.T
            c = int(((self.t - 1) // P) % 2)
            self.belief = T[0].T @ self.belief if c == 0 else self.belief @ T[1]

    def observe(self, X, y) -> None:
        c = int(((self.t - 1) // self.spec.switch_period) % 2)
        q = quadrant(np.asarray(X, dtype=float).reshape(len(np.atleast_1d(y)), -1))
        tables = self.spec.hhmm.tables
        for qi, yi in zip(q, np.atleast_1d(y)):
            like = np.where(tables[2 * c : 2 * c + 2, qi] == yi, 1.0, self.eps)
            self.belief = self.belief * (like[:, None] if c == 0 else like[None, :])
        self.belief /= self.belief.sum()

    def task_probs(self) -> np.ndarray:
        c = int(((self.t - 1) // self.spec.switch_period) % 2)
        p = np.zeros(4)
        p[2 * c : 2 * c + 2] = self.belief.sum(axis=1 - c)
        return p

    def run(self, data: Dataset, t: int) -> np.ndarray:
        """Filter through ``data`` up to time ``t``; returns task probabilities at ``t``."""
        while self.t < t:
            self.advance()
            mask = data.t == self.t
            if mask.any():
                self.observe(data.X[mask][:, :2], data.y[mask])
        return self.task_probs()


# -- future rollouts used by the risk estimators -------------------------------


def rollout(spec: ProcessSpec, t: int, horizon: int, n_mc: int, rng, chain_state=None):
    """Draw ``n_mc`` independent one-sample-per-step futures for times t+1..t+horizon.

    Returns ``(times, X, y)`` with shapes ``(horizon,)``, ``(n_mc, horizon, d)``
    and ``(n_mc, horizon)``. hhmm futures start from ``chain_state`` at ``t``.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    times = np.arange(t + 1, t + horizon + 1)
    shape = (n_mc, horizon)
    if spec.kind == "periodic":
        X = (rng.uniform(1.0, 2.0, shape) * rng.choice([-1.0, 1.0], shape))[..., None]
        y = true_labels(spec, np.broadcast_to(times, shape).ravel(), X.reshape(-1, 1)).reshape(shape)
    elif spec.kind == "linear":
        upper = rng.random(shape) < 0.5
        base = spec.epsilon * times
        X = np.where(upper, base + 10, base - 11) + rng.uniform(0.0, 1.0, shape)
        X = X[..., None]
        y = true_labels(spec, np.broadcast_to(times, shape).ravel(), X.reshape(-1, 1)).reshape(shape)
    else:
        h = spec.hhmm
        T = h.T
        state = np.tile(np.asarray(h.initial if chain_state is None else chain_state, dtype=np.int64), (n_mc, 1))
        tasks = np.zeros(shape, dtype=np.int64)
        P = spec.switch_period
        for j, s in enumerate(times):
            c = int(((s - 1) // P) % 2)
            if (s - 1) % P:
                p1 = T[c][state[:, c], 1]
                state[:, c] = (rng.random(n_mc) < p1).astype(np.int64)
            tasks[:, j] = 2 * c + state[:, c] + 1
        blob = rng.integers(0, len(h.means), shape)
        X = np.asarray(h.means, dtype=float)[blob] + h.sigma * rng.standard_normal(shape + (2,))
        y = true_labels(spec, None, X.reshape(-1, 2), tasks=tasks.ravel()).reshape(shape)
    if spec.noise_dims:
        X = np.concatenate([X, rng.standard_normal(shape + (spec.noise_dims,))], axis=2)
    return times, X, y


def bayes_step_errors(spec: ProcessSpec, t: int, times, chain_state=None) -> np.ndarray:
    """Bayes 0-1 error at each future time in ``times``."""
    times = np.asarray(times)
    if spec.kind in ("periodic", "linear"):
        return np.zeros(len(times))
    state = spec.hhmm.initial if chain_state is None else chain_state
    probs = task_marginals(spec, t, state, times)
    p1 = probs @ spec.hhmm.tables.astype(float)  # (n_times, 4 quadrants)
    return np.minimum(p1, 1 - p1) @ spec.hhmm.quadrant_probs()


def bayes_prospective_risk(spec: ProcessSpec, t: int, scheme: WeightingScheme, chain_state=None) -> float:
    times = np.arange(t + 1, t + scheme.horizon + 1)
    return float(scheme.vector() @ bayes_step_errors(spec, t, times, chain_state))


# -- serialisation -------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def dataset_to_csv(data: Dataset, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x_{j}" for j in range(data.dim)] + ["y"])
    for t, x, y in zip(data.t, data.X, data.y):
        w.writerow([int(t)] + [_fmt(v) for v in x] + [_fmt(y.item())])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _parse_num(s: str):
    return int(s) if s.lstrip("-").isdigit() else float(s)


def dataset_from_csv(source) -> Dataset:
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    if not body:
        return Dataset(np.zeros(0, np.int64), np.zeros((0, d)), np.zeros(0))
    t = np.array([int(r[0]) for r in body])
    X = np.array([[float(v) for v in r[1:-1]] for r in body]).reshape(len(body), d)
    y = np.array([_parse_num(r[-1]) for r in body])
    return Dataset(t, X, y)


def dataset_to_jsonl(data: Dataset, path=None) -> str:
    lines = [
        json.dumps({"t": int(t), "x": [float(v) for v in x], "y": y.item()})
        for t, x, y in zip(data.t, data.X, data.y)
    ]
    text = "".join(line + "\n" for line in lines)
    if path is not None:
        Path(path).write_text(text)
    return text


def dataset_from_jsonl(source) -> Dataset:
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not recs:
        return Dataset(np.zeros(0, np.int64), np.zeros((0, 0)), np.zeros(0))
    return Dataset(
        np.array([r["t"] for r in recs]),
        np.array([r["x"] for r in recs], dtype=float),
        np.array([r["y"] for r in recs]),
    )
