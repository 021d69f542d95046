"""Feed-forward networks trained by SGD, with time embeddings as extra inputs.

With a Fourier or monomial embedding the model is a Prospective-MLP; with
``EmbeddingSpec("none")`` it is the time-agnostic Follow-the-Leader baseline.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .core import Dataset, Prediction, TimedSample
from .embeddings import EmbeddingSpec, augment

MAGIC = b"PMLP"
FORMAT_VERSION = 1

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
}


class Network:
    """Dense layers; hidden layers share one activation, the last is linear."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], activation: str = "relu"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        for W, b, W_next in zip(weights, biases, weights[1:] + [None]):
            if W.shape[1] != b.shape[0] or (W_next is not None and W.shape[1] != W_next.shape[0]):
                raise ValueError("layer shapes do not chain")
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @classmethod
    def init(cls, sizes: list[int], activation: str, rng: np.random.Generator) -> "Network":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            gain = 2.0 if activation == "relu" else 1.0
            bound = np.sqrt(3.0 * gain / fan_in)
            weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "Network":
        return Network([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.activation)

    def forward(self, X: np.ndarray):
        act, _ = ACTIVATIONS[self.activation]
        zs, acts = [], [X]
        a = X
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if i == last else act(z)
            zs.append(z)
            acts.append(a)
        return a, (zs, acts)

    def backward(self, cache, dout: np.ndarray):
        """Gradients of a scalar loss given ``dout = dL/d(output)``.

        Returns ``(grads, dX)`` where ``grads`` is ordered like :meth:`params`.
        """
        _, dact = ACTIVATIONS[self.activation]
        zs, acts = cache
        grads = []
        delta = dout
        for i in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append(acts[i].T @ delta)
            delta = delta @ self.weights[i].T
            if i > 0:
                delta = delta * dact(zs[i - 1], acts[i])
        grads.reverse()
        return grads, delta


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (64, 64)
    activation: str = "relu"
    lr: float = 1e-2
    epochs: int = 200
    batch_size: int = 32
    weight_decay: float = 0.0
    n_classes: int = 2
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if len(self.hidden) < 1:
            raise ValueError("need at least one hidden layer")
        if self.lr <= 0 or self.weight_decay < 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("invalid optimiser settings")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unsupported activation {self.activation!r}")


@dataclass
class MlpModel:
    net: Network
    embedding: EmbeddingSpec
    input_dim: int
    x_shift: np.ndarray
    x_scale: np.ndarray
    seed: int = 0
    loss_history: list = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return self.net.sizes[-1]

    def features(self, t, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.input_dim)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input dims, got {X.shape[1]}")
        return augment(self.embedding, t, (X - self.x_shift) / self.x_scale)

    def predict_proba(self, t, X) -> np.ndarray:
        out, _ = self.net.forward(self.features(t, X))
        return softmax(out)

    def predict(self, t, X) -> np.ndarray:
        out, _ = self.net.forward(self.features(t, X))
        return out.argmax(axis=1)


def forward(model: MlpModel, t: int, x) -> Prediction:
    p = model.predict_proba([t], np.atleast_1d(np.asarray(x, dtype=float))[None])[0]
    return Prediction(int(p.argmax()), p)


def loss_and_gradient(net: Network, Z: np.ndarray, y: np.ndarray, weight_decay: float = 0.0):
    """Mean cross-entropy plus ``weight_decay * sum(W**2)`` and its gradient."""
    out, cache = net.forward(Z)
    p = softmax(out)
    n = len(y)
    nll = -np.log(np.clip(p[np.arange(n), y], 1e-300, None)).mean()
    dout = p.copy()
    dout[np.arange(n), y] -= 1.0
    grads, _ = net.backward(cache, dout / n)
    reg = 0.0
    if weight_decay:
        for k, W in enumerate(net.weights):
            reg += weight_decay * float((W * W).sum())
            grads[2 * k] = grads[2 * k] + 2.0 * weight_decay * W
    return nll + reg, grads


def gradient(model: MlpModel, batch: Dataset, weight_decay: float = 0.0) -> list[np.ndarray]:
    """Exact gradient of the minibatch cross-entropy, ordered as ``net.params()``."""
    Z = model.features(batch.t, batch.X)
    return loss_and_gradient(model.net, Z, np.asarray(batch.y, dtype=np.int64), weight_decay)[1]


def _new_model(config: MlpConfig, embedding: EmbeddingSpec, input_dim: int, shift, scale) -> MlpModel:
    rng = np.random.default_rng(config.seed)
    sizes = [embedding.dim + input_dim, *config.hidden, config.n_classes]
    net = Network.init(sizes, config.activation, rng)
    return MlpModel(net, embedding, input_dim, np.asarray(shift, float), np.asarray(scale, float), config.seed)


def _sgd_step(net: Network, grads, lr: float) -> None:
    for p, g in zip(net.params(), grads):
        p -= lr * g


def train_batched(config: MlpConfig, embedding: EmbeddingSpec, data: Dataset) -> MlpModel:
    """Minibatch SGD on cross-entropy over time-augmented samples.

    An epoch whose full-data loss exceeds the previous one is rolled back and
    the step size halved (never below ``lr / 64``), so the recorded loss
    history is non-increasing.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    embedding = embedding.resolved(int(data.t.max()))
    if config.standardize:
        shift = data.X.mean(axis=0)
        scale = data.X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        shift, scale = np.zeros(data.dim), np.ones(data.dim)
    model = _new_model(config, embedding, data.dim, shift, scale)
    Z = model.features(data.t, data.X)
    y = np.asarray(data.y, dtype=np.int64)
    rng = np.random.default_rng([config.seed, 1])
    lr, lr_floor = config.lr, config.lr / 64
    best, _ = loss_and_gradient(model.net, Z, y, config.weight_decay)
    model.loss_history.append(best)
    n, bs = len(y), config.batch_size
    for _ in range(config.epochs):
        saved = model.net.copy()
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start : start + bs]
            _, grads = loss_and_gradient(model.net, Z[idx], y[idx], config.weight_decay)
            _sgd_step(model.net, grads, lr)
        loss, _ = loss_and_gradient(model.net, Z, y, config.weight_decay)
        if not np.isfinite(loss):
            raise FloatingPointError(f"training loss became {loss} at lr={lr:g}; the learning rate is too high")
        if loss > best:
            model.net = saved
            lr = max(lr / 2, lr_floor)
        else:
            best = loss
        model.loss_history.append(best)
    return model


class OnlineTrainer:
    """One SGD step per incoming sample, strictly in time order."""

    def __init__(self, config: MlpConfig, embedding: EmbeddingSpec, input_dim: int):
        if embedding.kind == "monomial" and embedding.c is None:
            raise ValueError("online training needs a fixed monomial scale")
        self.config = config
        self.model = _new_model(config, embedding, input_dim, np.zeros(input_dim), np.ones(input_dim))
        self.last_t = -1
        self.n_seen = 0

    def update(self, sample: TimedSample) -> None:
        if sample.t < self.last_t:
            raise ValueError(f"stream went back in time ({sample.t} < {self.last_t}); online training is single-pass")
        self.last_t = sample.t
        Z = self.model.features([sample.t], sample.x[None])
        _, grads = loss_and_gradient(self.model.net, Z, np.array([int(sample.y)]), self.config.weight_decay)
        _sgd_step(self.model.net, grads, self.config.lr)
        self.n_seen += 1

    def update_many(self, data: Dataset) -> None:
        for s in data:
            self.update(s)


def train_online(config: MlpConfig, embedding: EmbeddingSpec, stream: Iterable[TimedSample], input_dim: int | None = None) -> MlpModel:
    stream = iter(stream)
    first = next(stream, None)
    if first is None:
        if input_dim is None:
            raise ValueError("empty stream: pass input_dim to build the initial model")
        return OnlineTrainer(config, embedding, input_dim).model
    trainer = OnlineTrainer(config, embedding, len(first.x))
    trainer.update(first)
    for s in stream:
        trainer.update(s)
    return trainer.model


# -- serialisation -------------------------------------------------------------


def _header(model: MlpModel) -> dict:
    return {
        "format": "prospective-mlp",
        "version": FORMAT_VERSION,
        "layers": [list(W.shape) for W in model.net.weights],
        "activation": model.net.activation,
        "embedding": model.embedding.to_dict(),
        "input_dim": model.input_dim,
        "seed": model.seed,
    }


def save_network_blob(header: dict, arrays: list[np.ndarray]) -> bytes:
    text = json.dumps(header, sort_keys=True).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return MAGIC + struct.pack("<BI", FORMAT_VERSION, len(text)) + text + b"\n" + body


def load_network_blob(blob: bytes) -> tuple[dict, memoryview]:
    if blob[:4] != MAGIC:
        raise ValueError("not a prospective model blob")
    version, n = struct.unpack("<BI", blob[4:9])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    header = json.loads(blob[9 : 9 + n])
    return header, memoryview(blob)[9 + n + 1 :]


def _read_arrays(body, shapes) -> list[np.ndarray]:
    out, off = [], 0
    for shape in shapes:
        size = int(np.prod(shape)) * 8
        out.append(np.frombuffer(body[off : off + size], dtype="<f8").reshape(shape).copy())
        off += size
    if off != len(body):
        raise ValueError("model blob has trailing or missing bytes")
    return out


def save(model: MlpModel) -> bytes:
    arrays = model.net.params() + [model.x_shift, model.x_scale]
    return save_network_blob(_header(model), arrays)


def load(blob: bytes) -> MlpModel:
    header, body = load_network_blob(blob)
    shapes = []
    for fan_in, fan_out in header["layers"]:
        shapes += [(fan_in, fan_out), (fan_out,)]
    d = header["input_dim"]
    arrays = _read_arrays(body, shapes + [(d,), (d,)])
    params, shift, scale = arrays[:-2], arrays[-2], arrays[-1]
    net = Network(params[0::2], params[1::2], header["activation"])
    emb = EmbeddingSpec(**header["embedding"])
    return MlpModel(net, emb, d, shift, scale, header["seed"])


def config_dict(config: MlpConfig) -> dict:
    d = asdict(config)
    d["hidden"] = list(config.hidden)
    return d


@dataclass(frozen=True)
class MlpLearner:
    """Batched learner: retrains from scratch on every call to :meth:`fit`."""

    config: MlpConfig = MlpConfig()
    embedding: EmbeddingSpec = EmbeddingSpec()

    def fit(self, data: Dataset) -> MlpModel:
        return train_batched(self.config, self.embedding, data)


@dataclass(frozen=True)
class OnlineMlpLearner:
    config: MlpConfig = MlpConfig()
    embedding: EmbeddingSpec = EmbeddingSpec()
    online = True

    def start(self, input_dim: int) -> OnlineTrainer:
        return OnlineTrainer(self.config, self.embedding, input_dim)
