"""Deterministic time embeddings concatenated to inputs."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class EmbeddingSpec:
    """``fourier`` uses frequencies pi/i for i = 1..d/2; ``monomial`` uses (t/c)^k.

    For monomial embeddings ``c=None`` means "use the largest training time";
    learners resolve it with :meth:`resolved` before fitting.
    """

    kind: str = "fourier"
    d: int = 20
    c: float | None = None

    def __post_init__(self):
        if self.kind not in ("fourier", "monomial", "none"):
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        if self.kind == "none":
            return
        if self.d < 1:
            raise ValueError("embedding dimension must be >= 1")
        if self.kind == "fourier" and self.d % 2:
            raise ValueError("fourier embedding needs an even dimension")
        if self.c is not None and self.c <= 0:
            raise ValueError("monomial scale must be positive")

    @property
    def dim(self) -> int:
        return 0 if self.kind == "none" else self.d

    def resolved(self, t_max: int) -> "EmbeddingSpec":
        if self.kind == "monomial" and self.c is None:
            return replace(self, c=float(max(t_max, 1)))
        return self

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "c": self.c}


NONE = EmbeddingSpec("none", 0)


def embed_many(spec: EmbeddingSpec, t) -> np.ndarray:
    """Embed an array of integer times; returns shape ``(len(t), spec.dim)``."""
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    if spec.kind == "none":
        return np.zeros((len(t), 0))
    if spec.kind == "fourier":
        i = np.arange(1, spec.d // 2 + 1)
        # sin(pi t / i) has period 2i; reducing first keeps values exact for large t
        phase = np.pi * (t[:, None] % (2 * i)) / i
        return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)
    if spec.c is None:
        raise ValueError("monomial embedding needs a scale; call spec.resolved(t_max)")
    u = t[:, None] / spec.c
    return u ** np.arange(1, spec.d + 1)


def embed(spec: EmbeddingSpec, t: int) -> np.ndarray:
    return embed_many(spec, [t])[0]


def augment(spec: EmbeddingSpec, t, X) -> np.ndarray:
    """Concatenate ``embed(t)`` in front of each input row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([embed_many(spec, t), X])
