"""CART trees, bagged forests and logistic gradient boosting on time-augmented inputs.

Features are ``embed(t) ++ x``; with ``EmbeddingSpec("none")`` the same code
gives the time-agnostic ("plain") baselines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, Prediction
from .embeddings import EmbeddingSpec, augment

TOL = 1e-10


@dataclass
class TreeNode:
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: np.ndarray | float | None = None
    n_samples: int = 0
    impurity: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def nodes(self):
        """Pre-order traversal."""
        yield self
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_leaf: int = 1
    criterion: str = "gini"  # or "mse"

    def __post_init__(self):
        if self.criterion not in ("gini", "mse"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.max_depth < 0 or self.min_leaf < 1:
            raise ValueError("invalid tree limits")


def node_impurity(targets: np.ndarray, criterion: str) -> float:
    """Weighted impurity (n * Gini, or sum of squared errors) of one node.

    For ``gini`` ``targets`` is a one-hot matrix, for ``mse`` a vector.
    """
    n = len(targets)
    if n == 0:
        return 0.0
    if criterion == "gini":
        c = targets.sum(axis=0)
        return float(n - (c * c).sum() / n)
    return float(((targets - targets.mean()) ** 2).sum())


def best_split(F: np.ndarray, targets: np.ndarray, criterion: str, min_leaf: int = 1, features=None):
    """Exhaustive best (feature, midpoint threshold) split.

    Returns ``(feature, threshold, impurity)`` or ``None`` when no split
    satisfies ``min_leaf``. Ties within ``TOL`` go to the lowest feature
    index, then the smallest threshold.
    """
    n, p = F.shape
    features = np.arange(p) if features is None else np.sort(np.asarray(features))
    if n < 2 * min_leaf or len(features) == 0:
        return None
    Fs = F[:, features]
    order = np.argsort(Fs, axis=0, kind="stable")
    v = np.take_along_axis(Fs, order, axis=0)
    n_left = np.arange(1, n)[:, None].astype(float)
    n_right = n - n_left
    if criterion == "gini":
        T = targets[order]  # (n, p, K)
        C = np.cumsum(T, axis=0)[:-1]
        R = targets.sum(axis=0)[None, None, :] - C
        imp = (n_left - (C * C).sum(axis=2) / n_left) + (n_right - (R * R).sum(axis=2) / n_right)
    else:
        Y = targets[order]
        S = np.cumsum(Y, axis=0)[:-1]
        S2 = np.cumsum(Y * Y, axis=0)[:-1]
        tot, tot2 = targets.sum(), (targets * targets).sum()
        imp = (S2 - S * S / n_left) + ((tot2 - S2) - (tot - S) ** 2 / n_right)
    valid = (v[1:] > v[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf)
    best = imp.min()
    near = imp <= best + TOL * (1.0 + abs(best))
    col = int(np.argmax(near.any(axis=0)))
    row = int(np.argmax(near[:, col]))
    lo, hi = v[row, col], v[row + 1, col]
    threshold = lo + 0.5 * (hi - lo)
    if not lo <= threshold < hi:  # adjacent doubles: the midpoint rounds onto hi
        threshold = lo
    return int(features[col]), float(threshold), float(imp[row, col])


def _leaf_value(targets: np.ndarray, criterion: str):
    if criterion == "gini":
        return targets.mean(axis=0)
    return float(targets.mean())


def grow_tree(F: np.ndarray, targets: np.ndarray, params: TreeParams, rng=None, max_features=None, depth: int = 0) -> TreeNode:
    n = len(targets)
    imp = node_impurity(targets, params.criterion)
    node = TreeNode(value=_leaf_value(targets, params.criterion), n_samples=n, impurity=imp)
    if depth >= params.max_depth or imp <= 1e-12:
        return node
    feats = None
    if max_features is not None and max_features < F.shape[1]:
        feats = rng.choice(F.shape[1], max_features, replace=False)
    split = best_split(F, targets, params.criterion, params.min_leaf, feats)
    if split is None or split[2] >= imp - 1e-12 * (1.0 + imp):
        return node
    f, thr, _ = split
    mask = F[:, f] <= thr
    node.feature, node.threshold = f, thr
    node.left = grow_tree(F[mask], targets[mask], params, rng, max_features, depth + 1)
    node.right = grow_tree(F[~mask], targets[~mask], params, rng, max_features, depth + 1)
    return node


class FlatTree:
    """Array form of a tree for vectorised prediction."""

    def __init__(self, root: TreeNode):
        nodes = list(root.nodes())
        index = {id(n): i for i, n in enumerate(nodes)}
        m = len(nodes)
        self.feature = np.full(m, -1, dtype=np.int64)
        self.threshold = np.zeros(m)
        self.left = np.zeros(m, dtype=np.int64)
        self.right = np.zeros(m, dtype=np.int64)
        width = next(len(np.atleast_1d(n.value)) for n in nodes if n.is_leaf)
        self.value = np.zeros((m, width))  # only leaf rows are ever read
        for i, nd in enumerate(nodes):
            if nd.is_leaf:
                self.value[i] = np.atleast_1d(nd.value)
            else:
                self.feature[i] = nd.feature
                self.threshold[i] = nd.threshold
                self.left[i] = index[id(nd.left)]
                self.right[i] = index[id(nd.right)]
        self.depth = root.depth()

    def apply(self, F: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(F), dtype=np.int64)
        rows = np.arange(len(F))
        for _ in range(self.depth):
            f = self.feature[idx]
            inner = f >= 0
            go_left = F[rows, np.maximum(f, 0)] <= self.threshold[idx]
            idx = np.where(inner, np.where(go_left, self.left[idx], self.right[idx]), idx)
        return idx

    def predict(self, F: np.ndarray) -> np.ndarray:
        return self.value[self.apply(F)]


def _features(data: Dataset, embedding: EmbeddingSpec) -> np.ndarray:
    return augment(embedding, data.t, data.X)


def _one_hot(y: np.ndarray, k: int) -> np.ndarray:
    return np.eye(k)[np.asarray(y, dtype=np.int64)]


def fit_tree(data: Dataset, embedding: EmbeddingSpec = EmbeddingSpec(), params: TreeParams = TreeParams(), n_classes: int = 2) -> TreeNode:
    """Greedy CART on ``embed(t) ++ x``; classification uses Gini, regression squared error."""
    if len(data) == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    embedding = embedding.resolved(int(data.t.max()))
    F = _features(data, embedding)
    targets = _one_hot(data.y, n_classes) if params.criterion == "gini" else np.asarray(data.y, dtype=float)
    return grow_tree(F, targets, params)


@dataclass
class EnsembleModel:
    kind: str  # "single-tree" | "forest" | "gbt"
    trees: list
    embedding: EmbeddingSpec
    input_dim: int
    n_classes: int = 2
    weights: list = field(default_factory=list)  # gbt per-tree weights
    init_score: float = 0.0  # gbt prior log-odds
    train_loss: list = field(default_factory=list)

    def __post_init__(self):
        self._flat = None

    @property
    def flat(self) -> list[FlatTree]:
        if self._flat is None or len(self._flat) != len(self.trees):
            self._flat = [FlatTree(t) for t in self.trees]
        return self._flat

    def features(self, t, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.input_dim)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} input dims, got {X.shape[1]}")
        return augment(self.embedding, t, X)

    def raw_score(self, F: np.ndarray) -> np.ndarray:
        out = np.full(len(F), self.init_score)
        for w, tree in zip(self.weights, self.flat):
            out += w * tree.predict(F)[:, 0]
        return out

    def proba_from_features(self, F: np.ndarray) -> np.ndarray:
        if self.kind == "gbt":
            p1 = sigmoid(self.raw_score(F))
            return np.stack([1 - p1, p1], axis=1)
        return np.mean([tree.predict(F) for tree in self.flat], axis=0)

    def predict_proba(self, t, X) -> np.ndarray:
        return self.proba_from_features(self.features(t, X))

    def predict(self, t, X) -> np.ndarray:
        return self.predict_proba(t, X).argmax(axis=1)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def predict(model: EnsembleModel, t: int, x) -> Prediction:
    p = model.predict_proba([t], np.atleast_1d(np.asarray(x, dtype=float))[None])[0]
    return Prediction(int(p.argmax()), p / p.sum())


@dataclass(frozen=True)
class ForestParams:
    B: int = 100
    bootstrap: bool = True
    feature_subsample: float | int | None = "sqrt"
    max_depth: int = 8
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("a forest needs B >= 1 trees")


def _max_features(spec, p: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(np.sqrt(p)))
    if isinstance(spec, float) and spec <= 1.0:
        return max(1, int(round(spec * p)))
    return min(int(spec), p)


def fit_forest(data: Dataset, embedding: EmbeddingSpec = EmbeddingSpec(), params: ForestParams = ForestParams(), n_classes: int = 2) -> EnsembleModel:
    """Bagged CART trees with per-node feature subsampling; predictions average probabilities."""
    if len(data) == 0:
        raise ValueError("cannot fit a forest on an empty dataset")
    embedding = embedding.resolved(int(data.t.max()))
    F = _features(data, embedding)
    Y = _one_hot(data.y, n_classes)
    rng = np.random.default_rng(params.seed)
    tp = TreeParams(params.max_depth, params.min_leaf, "gini")
    m = _max_features(params.feature_subsample, F.shape[1])
    trees, oob = [], []
    n = len(Y)
    for _ in range(params.B):
        idx = rng.integers(0, n, n) if params.bootstrap else np.arange(n)
        trees.append(grow_tree(F[idx], Y[idx], tp, rng, m))
        oob.append(np.setdiff1d(np.arange(n), idx))
    model = EnsembleModel("forest" if params.B > 1 else "single-tree", trees, embedding, data.dim, n_classes)
    model.oob_indices = oob
    return model


@dataclass(frozen=True)
class GbtParams:
    B: int = 200
    lr: float = 0.1
    max_depth: int = 3
    min_leaf: int = 1

    def __post_init__(self):
        if self.B < 0:
            raise ValueError("B must be >= 0")
        if not 0.0 < self.lr <= 1.0:
            raise ValueError("learning rate must lie in (0, 1]")


def logistic_loss(y: np.ndarray, score: np.ndarray) -> float:
    """Mean negative log-likelihood of labels in {0, 1} under logits ``score``."""
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


def fit_gbt(data: Dataset, embedding: EmbeddingSpec = EmbeddingSpec(), params: GbtParams = GbtParams()) -> EnsembleModel:
    """Stagewise logistic boosting with squared-error regression trees.

    Starts from the prior log-odds; each stage fits a tree to the residuals
    ``y - sigmoid(score)`` and adds it with weight ``lr``. The training loss
    must not increase from one stage to the next.
    """
    if len(data) == 0:
        raise ValueError("cannot fit boosting on an empty dataset")
    embedding = embedding.resolved(int(data.t.max()))
    F = _features(data, embedding)
    y = np.asarray(data.y, dtype=float)
    prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    init = float(np.log(prior / (1 - prior)))
    score = np.full(len(y), init)
    tp = TreeParams(params.max_depth, params.min_leaf, "mse")
    model = EnsembleModel("gbt", [], embedding, data.dim, 2, [], init)
    model.train_loss.append(logistic_loss(y, score))
    for _ in range(params.B):
        resid = y - sigmoid(score)
        tree = grow_tree(F, resid, tp)
        score = score + params.lr * FlatTree(tree).predict(F)[:, 0]
        loss = logistic_loss(y, score)
        if loss > model.train_loss[-1] + 1e-12:
            raise RuntimeError(f"boosting stage {len(model.trees)} increased the training loss")
        model.trees.append(tree)
        model.weights.append(params.lr)
        model.train_loss.append(loss)
    return model


def split_counts(model: EnsembleModel) -> np.ndarray:
    """Number of internal nodes splitting on each feature, over all trees."""
    p = model.embedding.dim + model.input_dim
    counts = np.zeros(p, dtype=np.int64)
    for tree in model.trees:
        for node in tree.nodes():
            if not node.is_leaf:
                counts[node.feature] += 1
    return counts


# -- learners ------------------------------------------------------------------


@dataclass(frozen=True)
class GbtLearner:
    params: GbtParams = GbtParams()
    embedding: EmbeddingSpec = EmbeddingSpec()

    def fit(self, data: Dataset) -> EnsembleModel:
        return fit_gbt(data, self.embedding, self.params)


@dataclass(frozen=True)
class ForestLearner:
    params: ForestParams = ForestParams()
    embedding: EmbeddingSpec = EmbeddingSpec()

    def fit(self, data: Dataset) -> EnsembleModel:
        return fit_forest(data, self.embedding, self.params)


# -- text serialisation --------------------------------------------------------


def _num(v: float) -> str:
    return repr(float(v))


def ensemble_to_text(model: EnsembleModel) -> str:
    header = {
        "format": "prospective-ensemble",
        "version": 1,
        "kind": model.kind,
        "embedding": model.embedding.to_dict(),
        "input_dim": model.input_dim,
        "n_classes": model.n_classes,
        "init_score": model.init_score,
        "weights": [float(w) for w in model.weights],
    }
    lines = [json.dumps(header, sort_keys=True)]
    for b, tree in enumerate(model.trees):
        nodes = list(tree.nodes())
        index = {id(n): i for i, n in enumerate(nodes)}
        lines.append(f"tree {b} {len(nodes)}")
        for i, nd in enumerate(nodes):
            if nd.is_leaf:
                vals = " ".join(_num(v) for v in np.atleast_1d(nd.value))
                kind = "vec" if isinstance(nd.value, np.ndarray) else "num"
                lines.append(f"{i} leaf {nd.n_samples} {kind} {vals}")
            else:
                lines.append(f"{i} split {nd.n_samples} {nd.feature} {_num(nd.threshold)} {index[id(nd.left)]} {index[id(nd.right)]}")
    return "\n".join(lines) + "\n"


def ensemble_from_text(text: str) -> EnsembleModel:
    lines = text.splitlines()
    header = json.loads(lines[0])
    if header.get("format") != "prospective-ensemble" or header.get("version") != 1:
        raise ValueError("not a version-1 ensemble file")
    trees = []
    pos = 1
    while pos < len(lines):
        _, _, count = lines[pos].split()
        rows = [ln.split() for ln in lines[pos + 1 : pos + 1 + int(count)]]
        pos += 1 + int(count)
        nodes = [TreeNode() for _ in rows]
        for r in rows:
            nd = nodes[int(r[0])]
            nd.n_samples = int(r[2])
            if r[1] == "leaf":
                vals = np.array([float(v) for v in r[4:]])
                nd.value = vals if r[3] == "vec" else float(vals[0])
            else:
                nd.feature, nd.threshold = int(r[3]), float(r[4])
                nd.left, nd.right = nodes[int(r[5])], nodes[int(r[6])]
        trees.append(nodes[0])
    return EnsembleModel(
        header["kind"], trees, EmbeddingSpec(**header["embedding"]), header["input_dim"],
        header["n_classes"], header["weights"], header["init_score"],
    )
