"""Shared data model, losses, and the weighted future-loss used by every learner.

Time is an integer index starting at 1. A :class:`Dataset` stores samples as
parallel arrays (``t``, ``X``, ``y``) sorted by time; gaps and repeated time
steps are both allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Protocol, Sequence

import numpy as np


@dataclass(frozen=True)
class TimedSample:
    t: int
    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError(f"non-finite input at t={self.t}")
        if self.t < 0:
            raise ValueError(f"negative time index {self.t}")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class Dataset:
    """Time-ordered samples stored column-wise."""

    t: np.ndarray
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(len(t), -1) if len(t) else X.reshape(0, 0)
        y = np.asarray(self.y).reshape(-1)
        if not (len(t) == len(X) == len(y)):
            raise ValueError("t, X and y must have the same length")
        if len(t) and np.any(np.diff(t) < 0):
            raise ValueError("samples must be sorted by time")
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs contain NaN or Inf")
        for name, arr in (("t", t), ("X", X), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_samples(cls, samples: Sequence[TimedSample]) -> "Dataset":
        if not samples:
            return cls(np.zeros(0, np.int64), np.zeros((0, 0)), np.zeros(0))
        return cls(
            np.array([s.t for s in samples]),
            np.stack([s.x for s in samples]),
            np.array([s.y for s in samples]),
        )

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[TimedSample]:
        for i in range(len(self)):
            yield TimedSample(int(self.t[i]), self.X[i], self.y[i].item())

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def up_to(self, t: int) -> "Dataset":
        """Samples with time ``<= t`` (the observed past at time ``t``)."""
        n = int(np.searchsorted(self.t, t, side="right"))
        return Dataset(self.t[:n], self.X[:n], self.y[:n])

    def after(self, t: int) -> "Dataset":
        n = int(np.searchsorted(self.t, t, side="right"))
        return Dataset(self.t[n:], self.X[n:], self.y[n:])


@dataclass(frozen=True)
class Prediction:
    value: float
    proba: np.ndarray | None = None

    def __post_init__(self):
        if self.proba is not None:
            p = np.asarray(self.proba, dtype=float)
            if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError(f"invalid probability vector {p}")
            object.__setattr__(self, "proba", p)


class Hypothesis(Protocol):
    """Anything that maps (times, inputs) to predicted labels, vectorised."""

    def predict(self, t: np.ndarray, X: np.ndarray) -> np.ndarray: ...


def zero_one_loss(pred, y) -> float | np.ndarray:
    """0 when the predicted label equals ``y``, 1 otherwise (vectorises)."""
    value = pred.value if isinstance(pred, Prediction) else pred
    out = (np.asarray(value) != np.asarray(y)).astype(float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightingScheme:
    """Non-increasing offset weights w(i), i >= 1, summing to one.

    ``uniform`` puts mass 1/horizon on offsets 1..horizon. ``geometric`` puts
    mass proportional to decay**i on offsets 1..horizon (the truncation length)
    and renormalises.
    """

    kind: str = "uniform"
    horizon: int = 200
    decay: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "geometric"):
            raise ValueError(f"unknown weighting kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.kind == "geometric" and not 0.0 < self.decay < 1.0:
            raise ValueError("geometric decay must lie in (0, 1)")

    def vector(self) -> np.ndarray:
        """Weights for offsets 1..horizon."""
        if self.kind == "uniform":
            return np.full(self.horizon, 1.0 / self.horizon)
        raw = self.decay ** np.arange(1, self.horizon + 1, dtype=float)
        return raw / raw.sum()


def weights(scheme: WeightingScheme, offset: int) -> float:
    if offset < 1:
        raise ValueError("offsets start at 1: the loss looks strictly into the future")
    if offset > scheme.horizon:
        return 0.0
    return float(scheme.vector()[offset - 1])


def per_step_mean(times: np.ndarray, losses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average losses sharing a time step; returns (unique times, means)."""
    uniq, inverse, counts = np.unique(times, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse, weights=losses, minlength=len(uniq))
    return uniq, sums / counts


def prospective_loss(
    h: Hypothesis,
    future: Dataset,
    t: int,
    scheme: WeightingScheme,
    loss: Callable = zero_one_loss,
) -> float:
    """Weighted future loss of ``h`` on samples strictly after ``t``.

    Several samples at the same time step are averaged first so each step's
    weight depends only on its offset ``s - t``.
    """
    if len(future) == 0:
        return 0.0
    if future.t.min() <= t:
        raise ValueError(f"future samples must have time > {t}")
    preds = h.predict(future.t, future.X)
    losses = np.asarray(loss(preds, future.y), dtype=float)
    steps, means = per_step_mean(future.t, losses)
    offsets = steps - t
    w = scheme.vector()
    inside = offsets <= scheme.horizon
    return float(np.dot(w[offsets[inside] - 1], means[inside]))


@dataclass
class FunctionHypothesis:
    """Wraps a plain ``f(t, X) -> labels`` callable as a :class:`Hypothesis`."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = field(default="fn")

    def predict(self, t, X):
        return np.asarray(self.fn(np.asarray(t), np.asarray(X)))
