"""Actor-critic foragers trained in a single continuous lifetime.

Three variants share one network and optimiser:

``retrospective``
    on-policy updates on the latest window of ``update_every`` steps.
``prospective``
    updates on the worst recent window of the stored trajectory: among
    windows ending now with lengths ``min_window .. len(buffer)``, the one
    with the largest mean loss ``-advantage``.
``prospective-time``
    as ``prospective`` with a Fourier time embedding appended to every
    observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from ..embeddings import NONE, EmbeddingSpec
from ..evaluation import RiskCurve
from ..mlp import Network, load_network_blob, save_network_blob, softmax, _read_arrays
from .env import ACTIONS, ForagingEnv, ForagingParams, ForagingTrajectory, departures, encode
from .oracle import OptimalPolicy, optimal_policy, rollout_table

VARIANTS = ("retrospective", "prospective", "prospective-time")


# -- advantages ----------------------------------------------------------------


def gae(rewards, values, bootstrap: float, gamma: float, lam: float) -> np.ndarray:
    """Generalised advantage estimates by the backward recursion A_s = d_s + gamma*lam*A_{s+1}."""
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape:
        raise ValueError("rewards and values must have equal length")
    v_next = np.append(v[1:], bootstrap)
    delta = r + gamma * v_next - v
    return lfilter([1.0], [1.0, -gamma * lam], delta[::-1])[::-1]


def gae_bruteforce(rewards, values, bootstrap: float, gamma: float, lam: float) -> np.ndarray:
    """Direct double sum over future TD errors; O(T^2) reference for :func:`gae`."""
    r = np.asarray(rewards, dtype=float)
    v = np.append(np.asarray(values, dtype=float), bootstrap)
    T = len(r)
    delta = [r[s] + gamma * v[s + 1] - v[s] for s in range(T)]
    out = np.zeros(T)
    for s in range(T):
        acc = 0.0
        for l in range(T - s):
            acc += (gamma * lam) ** l * delta[s + l]
        out[s] = acc
    return out


def worst_window(losses, min_window: int = 1) -> tuple[int, float]:
    """Length ``m`` in ``[min_window, len(losses)]`` maximising the mean of the last ``m`` losses.

    Ties go to the shortest window; with fewer than ``min_window`` losses the
    whole sequence is used.
    """
    losses = np.asarray(losses, dtype=float)
    n = len(losses)
    if n == 0:
        raise ValueError("no losses")
    means = np.cumsum(losses[::-1]) / np.arange(1, n + 1)
    lo = min(min_window, n) - 1
    m = lo + int(np.argmax(means[lo:]))
    return m + 1, float(means[m])


# -- network -------------------------------------------------------------------


@dataclass
class ActorCritic:
    """Shared tanh trunk; the linear output holds 3 action logits followed by the state value."""

    net: Network
    embedding: EmbeddingSpec
    params: ForagingParams
    value_scale: float = 1.0  # V = value_scale * raw output, so the head works at O(1)

    @classmethod
    def init(cls, params: ForagingParams, embedding: EmbeddingSpec, hidden=(64, 64), seed=0, value_scale: float = 1.0) -> "ActorCritic":
        rng = np.random.default_rng(seed)
        sizes = [params.obs_dim(embedding), *hidden, len(ACTIONS) + 1]
        net = Network.init(sizes, "tanh", rng)
        net.weights[-1] *= 0.1  # start near-uniform policy and zero values
        return cls(net, embedding, params, value_scale)

    def forward(self, X: np.ndarray):
        out, cache = self.net.forward(X)
        return out[:, :3], self.value_scale * out[:, 3], cache

    def loss_and_grads(self, X, actions, advantages, returns, entropy: float = 0.01, value_coef: float = 0.5, behavior_logp=None, clip: float | None = None):
        """Mean of ``-A log pi(a|x) - entropy * H(pi(x)) + value_coef/2 (V(x) - R)^2``.

        With ``behavior_logp`` and ``clip`` the policy term becomes the clipped
        ratio surrogate ``-min(rho A, clip(rho, 1-c, 1+c) A)`` with
        ``rho = pi(a|x) / mu(a|x)``; its gradient equals the plain one at
        ``rho = 1``.
        """
        logits, values, cache = self.forward(X)
        n = len(X)
        pi = softmax(logits)
        logp = np.log(pi + 1e-300)
        H = -(pi * logp).sum(axis=1)
        idx = np.arange(n)
        A = np.asarray(advantages, dtype=float)
        err = values - np.asarray(returns, dtype=float)
        onehot = np.zeros_like(pi)
        onehot[idx, actions] = 1.0
        if clip is None:
            policy = -A * logp[idx, actions]
            coef = A
        else:
            rho = np.exp(logp[idx, actions] - np.asarray(behavior_logp, dtype=float))
            unclipped, clipped = rho * A, np.clip(rho, 1 - clip, 1 + clip) * A
            policy = -np.minimum(unclipped, clipped)
            coef = np.where(unclipped <= clipped, rho * A, 0.0)
        loss = float(np.mean(policy - entropy * H + 0.5 * value_coef * err**2))
        d_logits = -coef[:, None] * (onehot - pi) + entropy * pi * (logp + H[:, None])
        d_out = np.hstack([d_logits, (value_coef * self.value_scale * err)[:, None]]) / n
        grads, _ = self.net.backward(cache, d_out)
        return loss, grads

    def obs(self, env: ForagingEnv) -> np.ndarray:
        return encode(self.params, self.embedding, [env.pos], [tuple(env.history)], [env.t])

    def act(self, env: ForagingEnv, rng=None) -> int:
        """Greedy action, or a sample from the policy when ``rng`` is given."""
        logits, _, _ = self.forward(self.obs(env))
        if rng is None:
            return int(np.argmax(logits[0]))
        p = softmax(logits)[0]
        return int(min(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"), 2))

    def to_bytes(self) -> bytes:
        header = {
            "format": "prospective-actor-critic",
            "layers": [list(W.shape) for W in self.net.weights],
            "activation": self.net.activation,
            "embedding": self.embedding.to_dict(),
            "env": self.params.to_dict(),
            "value_scale": self.value_scale,
        }
        return save_network_blob(header, self.net.params())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ActorCritic":
        header, body = load_network_blob(blob)
        if header.get("format") != "prospective-actor-critic":
            raise ValueError("not an actor-critic checkpoint")
        shapes = []
        for fan_in, fan_out in header["layers"]:
            shapes += [(fan_in, fan_out), (fan_out,)]
        arrays = _read_arrays(body, shapes)
        net = Network(arrays[0::2], arrays[1::2], header["activation"])
        return cls(net, EmbeddingSpec(**header["embedding"]), ForagingParams(**header["env"]), header["value_scale"])


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params, self.lr, self.betas, self.eps = params, lr, betas, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.k = 0

    def step(self, grads) -> None:
        self.k += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1**self.k, 1 - b2**self.k
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- evaluation ----------------------------------------------------------------


def rollout_agent(agent, env: ForagingEnv, steps: int):
    """Run ``agent.act`` on a copy of ``env``; returns times, positions, actions, rewards."""
    env = env.copy()
    times, positions, actions, rewards = [], [], [], []
    for _ in range(steps):
        a = agent.act(env)
        times.append(env.t)
        positions.append(env.pos)
        actions.append(a)
        rewards.append(env.step(a)[1])
    return np.array(times), np.array(positions), np.array(actions), np.array(rewards)


def foraging_risk(agent, env: ForagingEnv, horizon: int, oracle: OptimalPolicy | None = None, margin: float = 0.0) -> float:
    """``1 - reward(agent) / reward(optimal policy)`` over ``horizon`` steps from the same state."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    oracle = oracle or optimal_policy(env.params)
    got = rollout_agent(agent, env, horizon)[3].sum()
    best = rollout_table(env.params, oracle.table, env.t, env.pos, horizon)[2].sum()
    if best <= 0:
        raise ValueError("the optimal policy collects no reward over this horizon")
    return float(np.clip(1.0 - got / best, 0.0, 1.0 + margin))


class RandomForager:
    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)

    def act(self, env) -> int:
        return int(self.rng.integers(0, len(ACTIONS)))


def chance_risk(env: ForagingEnv, horizon: int, n_seeds: int = 100, oracle: OptimalPolicy | None = None) -> tuple[float, float]:
    """Mean and standard error of the uniform-random policy's risk."""
    oracle = oracle or optimal_policy(env.params)
    r = np.array([foraging_risk(RandomForager(s), env, horizon, oracle) for s in range(n_seeds)])
    return float(r.mean()), float(r.std(ddof=1) / np.sqrt(n_seeds)) if n_seeds > 1 else 0.0


def action_plan(agent, env: ForagingEnv, steps: int, skip: int = 0) -> np.ndarray:
    return rollout_agent(agent, env, skip + steps)[2][skip:]


def departure_phase(agent, env: ForagingEnv, steps: int = 200, skip: int = 100) -> float | None:
    """Median time-in-phase at which the greedy agent leaves the active patch, after ``skip`` steps."""
    t, p, a, _ = rollout_agent(agent, env, skip + steps)
    d = departures(env.params, t[skip:], p[skip:], a[skip:])
    return float(np.median(d)) if d else None


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class AgentConfig:
    hidden: tuple = (64, 64)
    lr: float = 1e-3
    entropy: float = 0.01
    value_coef: float = 0.5
    gamma: float = 0.99
    lam: float = 0.95
    update_every: int = 20
    epochs: int = 4
    buffer: int = 1000
    min_window: int = 20
    embedding: EmbeddingSpec = field(default_factory=lambda: EmbeddingSpec("fourier", 20))
    normalize_advantages: bool = True
    clip: float | None = 0.2
    value_scale: float = 1.0
    anneal: bool = False
    entropy_decay: bool = False
    eval_every: int = 1000
    eval_horizon: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.update_every < 1 or self.epochs < 1 or self.buffer < 1:
            raise ValueError("update_every, epochs and buffer must be >= 1")
        if not 1 <= self.min_window <= self.buffer:
            raise ValueError("min_window must lie in [1, buffer]")
        if not (0 < self.gamma <= 1 and 0 <= self.lam <= 1):
            raise ValueError("need 0 < gamma <= 1 and 0 <= lam <= 1")


@dataclass
class TrainingRun:
    agent: ActorCritic
    curve: RiskCurve
    env: ForagingEnv
    trajectory: ForagingTrajectory
    windows: list


def _embedding_for(variant: str, config: AgentConfig) -> EmbeddingSpec:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    return config.embedding if variant == "prospective-time" else NONE


def train_agent(variant: str, params: ForagingParams = ForagingParams(), steps: int = 20_000, config: AgentConfig = AgentConfig()):
    """Train one agent for ``steps`` environment steps without resets.

    Returns ``(agent, curve)``; the curve holds the one-cycle risk and the
    ``eval_horizon`` risk of the greedy agent at every ``eval_every`` steps.
    """
    run = train_run(variant, params, steps, config)
    return run.agent, run.curve


def train_run(variant: str, params: ForagingParams = ForagingParams(), steps: int = 20_000, config: AgentConfig = AgentConfig()) -> TrainingRun:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    emb = _embedding_for(variant, config)
    rng = np.random.default_rng([config.seed, 1])
    agent = ActorCritic.init(params, emb, config.hidden, [config.seed, 0], config.value_scale)
    opt = Adam(agent.net.params(), config.lr)
    oracle = optimal_policy(params)
    env = ForagingEnv(params)
    curve = RiskCurve(variant, config.seed, "foraging")

    dim = params.obs_dim(emb)
    X = np.zeros((steps, dim))
    acts = np.zeros(steps, dtype=np.int64)
    mu = np.zeros(steps)
    rew = np.zeros(steps)
    pos_log = np.zeros(steps, dtype=np.int64)
    val_log = np.zeros(steps)
    adv_log = np.zeros(steps)
    windows = []

    x = agent.obs(env)
    for s in range(steps):
        logits, v, _ = agent.forward(x)
        p = softmax(logits)[0]
        a = int(min(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"), 2))
        X[s], acts[s], mu[s], pos_log[s], val_log[s] = x[0], a, np.log(p[a]), env.pos, v[0]
        _, rew[s] = env.step(a)
        x = agent.obs(env)

        n = s + 1
        if n % config.update_every == 0:
            if variant == "retrospective":
                lo = n - config.update_every
            else:
                lo = max(0, n - config.buffer)
            Xw = X[lo:n]
            _, V, _ = agent.forward(np.vstack([Xw, x]))
            A = gae(rew[lo:n], V[:-1], V[-1], config.gamma, config.lam)
            if variant != "retrospective":
                m, _ = worst_window(-A, config.min_window)
                A, V, Xw = A[-m:], V[:-1][-m:], Xw[-m:]
                lo = n - m
            else:
                V = V[:-1]
            windows.append(n - lo)
            adv_log[lo:n] = A
            R = A + V
            Aw = (A - A.mean()) / (A.std() + 1e-8) if config.normalize_advantages and len(A) > 1 else A
            if config.anneal:
                opt.lr = config.lr * (1.0 - s / steps)
            beta = config.entropy * (1.0 - s / steps) if config.entropy_decay else config.entropy
            for _ in range(config.epochs):
                loss, grads = agent.loss_and_grads(
                    Xw, acts[lo:n], Aw, R, beta, config.value_coef, mu[lo:n], config.clip
                )
                if not np.isfinite(loss):
                    raise FloatingPointError(f"{variant} agent diverged at step {n} (loss {loss})")
                opt.step(grads)
            x = agent.obs(env)

        if n % config.eval_every == 0 or n == steps:
            if not curve.t or curve.t[-1] < n:
                inst = foraging_risk(agent, env, params.cycle, oracle)
                prosp = foraging_risk(agent, env, config.eval_horizon, oracle)
                curve.add(n, inst, prosp)

    traj = ForagingTrajectory(pos_log.tolist(), acts.tolist(), rew.tolist(), val_log.tolist(), adv_log.tolist())
    return TrainingRun(agent, curve, env, traj, windows)

