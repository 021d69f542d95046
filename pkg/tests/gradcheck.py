"""Central finite-difference checks shared by the unit and acceptance tests."""

import numpy as np

EPS = 1e-6
FLOOR = 1e-6  # gradients below this are compared in absolute terms


def relative_errors(params, grads, loss_fn, rng, per_array=10):
    """Relative error at ``per_array`` random coordinates of every parameter array.

    ``loss_fn()`` must recompute the loss from the (mutated in place) ``params``.
    """
    errs = []
    for p, g in zip(params, grads):
        flat, gflat = p.reshape(-1), np.asarray(g).reshape(-1)
        for i in rng.choice(flat.size, size=min(per_array, flat.size), replace=False):
            old = flat[i]
            flat[i] = old + EPS
            up = loss_fn()
            flat[i] = old - EPS
            down = loss_fn()
            flat[i] = old
            num = (up - down) / (2 * EPS)
            errs.append(abs(num - gflat[i]) / max(abs(num), abs(gflat[i]), FLOOR))
    return np.array(errs)
