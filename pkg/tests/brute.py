"""Slow reference implementations used as oracles in tests."""

import itertools

import numpy as np


def gini_weighted(labels, k):
    n = len(labels)
    counts = np.bincount(labels, minlength=k)
    return n - (counts**2).sum() / n


def sse(values):
    return float(((values - values.mean()) ** 2).sum())


def brute_best_split(F, y, criterion="gini", k=2, min_leaf=1, rtol=1e-9):
    """Every (feature, midpoint) pair scored from explicit masks.

    Ties within ``rtol`` go to the lowest feature, then the smallest threshold.
    """
    cands = []
    for f in range(F.shape[1]):
        vals = np.unique(F[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            if not lo <= thr < hi:
                thr = lo
            left = F[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            if criterion == "gini":
                imp = gini_weighted(y[left], k) + gini_weighted(y[~left], k)
            else:
                imp = sse(y[left]) + sse(y[~left])
            cands.append((imp, f, thr))
    if not cands:
        return None
    best = min(c[0] for c in cands)
    near = [c for c in cands if c[0] <= best + rtol * (1 + abs(best))]
    imp, f, thr = min(near, key=lambda c: (c[1], c[2]))
    return f, thr, imp


def check_tree_against_brute(node, F, y, criterion="gini", k=2, min_leaf=1):
    """Walk ``node``; at each internal node compare with the brute-force split. Returns node count."""
    if node.is_leaf:
        return 1
    ref = brute_best_split(F, y, criterion, k, min_leaf)
    assert ref is not None, "tree split where no split is valid"
    f, thr, imp = ref
    # thresholds may differ in the last ulp depending on how the midpoint is formed
    assert node.feature == f, (node.feature, node.threshold, ref)
    np.testing.assert_array_equal(F[:, f] <= node.threshold, F[:, f] <= thr)
    assert abs(node.threshold - thr) <= 4 * np.spacing(abs(thr) + 1.0)
    assert abs(node.left.impurity + node.right.impurity - imp) <= 1e-9 * (1 + imp)
    mask = F[:, f] <= thr
    return (1 + check_tree_against_brute(node.left, F[mask], y[mask], criterion, k, min_leaf)
            + check_tree_against_brute(node.right, F[~mask], y[~mask], criterion, k, min_leaf))


def random_split_instance(rng):
    """Up to 50 samples with tied and continuous features, 2 or 3 classes."""
    n = int(rng.integers(2, 51))
    p = int(rng.integers(1, 5))
    k = int(rng.integers(2, 4))
    F = np.where(rng.random((n, p)) < 0.5, rng.integers(0, 4, (n, p)).astype(float), rng.normal(size=(n, p)))
    y = rng.integers(0, k, n)
    return F, y, k


def enumerated_task_probs(spec, t, chain_state, horizon):
    """P(task at t+j = k), j = 1..horizon, by summing over every hidden chain path."""
    T = spec.hhmm.T
    P = spec.switch_period
    task_p = np.zeros((horizon, 4))
    for path in itertools.product((0, 1), repeat=horizon):
        state = list(chain_state)
        prob = 1.0
        tasks = []
        for j, s in enumerate(range(t + 1, t + horizon + 1)):
            c = ((s - 1) // P) % 2
            if (s - 1) % P:
                prob *= T[c][state[c], path[j]]
                state[c] = path[j]
            elif path[j] != 0:
                prob = 0.0  # no transition on a block's first step: count the path once
            tasks.append(2 * c + state[c])
        if prob:
            for j, k in enumerate(tasks):
                task_p[j, k] += prob
    return task_p
