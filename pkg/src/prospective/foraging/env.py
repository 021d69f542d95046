"""A 1x7 track with two patches whose reward source alternates and decays."""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from ..embeddings import EmbeddingSpec, embed_many

LEFT, STAY, RIGHT = 0, 1, 2
ACTIONS = (LEFT, STAY, RIGHT)
ACTION_NAMES = ("left", "stay", "right")
MOVES = np.array([-1, 0, 1])
NULL_ACTION = -1


@dataclass(frozen=True)
class ForagingParams:
    """Patch A is active while ``(t // period) % 2 == 0``, patch B otherwise.

    Stepping advances ``t`` first; the step pays ``r0 * exp(-kappa * tau)``
    with ``tau = t % period`` if the new position is the active patch.
    """

    length: int = 7
    patch_a: int = 2
    patch_b: int = 5
    period: int = 10
    kappa: float = 0.2
    r0: float = 1.0
    start_pos: int = 3
    history: int = 20

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("track needs at least two cells")
        for name in ("patch_a", "patch_b", "start_pos"):
            if not 0 <= getattr(self, name) < self.length:
                raise ValueError(f"{name} must lie on the track")
        if self.patch_a == self.patch_b:
            raise ValueError("patches must differ")
        if self.period < 1 or self.history < 0:
            raise ValueError("period must be >= 1 and history >= 0")
        if self.kappa < 0 or self.r0 <= 0:
            raise ValueError("need kappa >= 0 and r0 > 0")

    @property
    def cycle(self) -> int:
        return 2 * self.period

    def active_patch(self, t):
        t = np.asarray(t)
        return np.where((t // self.period) % 2 == 0, self.patch_a, self.patch_b)

    def reward(self, t, pos):
        """Reward for arriving at ``pos`` at time ``t``."""
        t, pos = np.asarray(t), np.asarray(pos)
        r = np.where(pos == self.active_patch(t), self.r0 * np.exp(-self.kappa * (t % self.period)), 0.0)
        return float(r) if r.ndim == 0 else r

    def move(self, pos, action):
        return np.clip(np.asarray(pos) + MOVES[np.asarray(action)], 0, self.length - 1)

    def obs_dim(self, embedding: EmbeddingSpec) -> int:
        return self.length + 3 * self.history + embedding.dim

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Observation:
    t: int
    pos: int
    actions: tuple  # oldest first, NULL_ACTION before the start

    def vector(self, params: ForagingParams, embedding: EmbeddingSpec) -> np.ndarray:
        return encode(params, embedding, [self.pos], [self.actions], [self.t])[0]


def encode(params: ForagingParams, embedding: EmbeddingSpec, pos, actions, t) -> np.ndarray:
    """Rows of ``one_hot(pos) ++ one_hot(a_1) .. one_hot(a_H) ++ embed(t)``; null actions are all-zero."""
    pos = np.asarray(pos, dtype=np.int64)
    A = np.asarray(actions, dtype=np.int64).reshape(len(pos), params.history)
    n = len(pos)
    out = np.zeros((n, params.length + 3 * params.history))
    out[np.arange(n), pos] = 1.0
    rows, slots = np.nonzero(A >= 0)
    out[rows, params.length + 3 * slots + A[rows, slots]] = 1.0
    if embedding.dim:
        out = np.hstack([out, embed_many(embedding, t)])
    return out


class ForagingEnv:
    """Mutable environment state; there is no reset within a run."""

    def __init__(self, params: ForagingParams = ForagingParams(), t: int = 0, pos: int | None = None, history=None):
        self.params = params
        self.t = int(t)
        self.pos = params.start_pos if pos is None else int(pos)
        hist = [NULL_ACTION] * params.history if history is None else list(history)
        if len(hist) != params.history:
            raise ValueError("history length mismatch")
        self.history = deque(hist, maxlen=params.history)

    def copy(self) -> "ForagingEnv":
        return ForagingEnv(self.params, self.t, self.pos, self.history)

    @property
    def tau(self) -> int:
        return self.t % self.params.period

    @property
    def active(self) -> int:
        return int(self.params.active_patch(self.t))

    def observe(self) -> Observation:
        return Observation(self.t, self.pos, tuple(self.history))

    def step(self, action: int) -> tuple[Observation, float]:
        if action not in ACTIONS:
            raise ValueError(f"invalid action {action!r}")
        self.t += 1
        self.pos = int(self.params.move(self.pos, action))
        if self.params.history:
            self.history.append(action)
        return self.observe(), self.params.reward(self.t, self.pos)


def env_step(env: ForagingEnv, action: int) -> tuple[Observation, float]:
    return env.step(action)


def departures(params: ForagingParams, times, positions, actions) -> list[int]:
    """Time-in-phase at each step where the agent walks off the active patch.

    ``times[i]`` and ``positions[i]`` describe the state in which
    ``actions[i]`` was taken.
    """
    out = []
    for t, p, a in zip(times, positions, actions):
        if p == params.active_patch(t) and params.move(p, a) != p:
            out.append(int(t % params.period))
    return out


# -- trajectory logs -----------------------------------------------------------


@dataclass
class ForagingTrajectory:
    """Per-step log; ``advantage`` comes from the GAE recursion over the stored rewards and values."""

    pos: list
    action: list
    reward: list
    value: list
    advantage: list
    start_step: int = 1

    @property
    def loss(self) -> np.ndarray:
        return -np.asarray(self.advantage, dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "pos", "action", "reward", "value", "advantage"])
        for i, row in enumerate(zip(self.pos, self.action, self.reward, self.value, self.advantage)):
            p, a, r, v, adv = row
            w.writerow([self.start_step + i, int(p), ACTION_NAMES[int(a)], repr(float(r)), repr(float(v)), repr(float(adv))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ForagingTrajectory":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty trajectory log")
        return cls(
            [int(r["pos"]) for r in rows],
            [ACTION_NAMES.index(r["action"]) for r in rows],
            [float(r["reward"]) for r in rows],
            [float(r["value"]) for r in rows],
            [float(r["advantage"]) for r in rows],
            int(rows[0]["step"]),
        )
