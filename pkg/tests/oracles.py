"""Independent reference computations used by the tests."""

import numpy as np

from formpred import deepnet


def finite_difference_gradient(params, X, Y, step=1e-5):
    """Central differences of the MSE loss, one parameter at a time."""
    grads_w, grads_b = [], []
    for arrays, out in ((params.weights, grads_w), (params.biases, grads_b)):
        for a in arrays:
            g = np.zeros_like(a)
            for idx in np.ndindex(a.shape):
                old = a[idx]
                a[idx] = old + step
                up = deepnet.loss(params, X, Y)
                a[idx] = old - step
                down = deepnet.loss(params, X, Y)
                a[idx] = old
                g[idx] = (up - down) / (2 * step)
            out.append(g)
    return deepnet.NetworkParams(grads_w, grads_b)


def relative_error(analytic, numeric):
    """Entrywise |a - n| / max(|a|, |n|); entries where both vanish count as 0."""
    a, n = analytic.flat(), numeric.flat()
    scale = np.maximum(np.abs(a), np.abs(n))
    err = np.abs(a - n)
    return np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), 0.0)


def random_network_problem(seed):
    """Random net with at most 3 hidden layers of width at most 8 plus a batch of at most 10 rows."""
    rng = np.random.default_rng(seed)
    hidden = [int(w) for w in rng.integers(1, 9, size=rng.integers(0, 4))]
    widths = (int(rng.integers(1, 6)), *hidden, int(rng.integers(1, 5)))
    params = deepnet.init(deepnet.NetworkSpec(widths, seed))
    for b in params.biases:
        b[:] = rng.normal(0, 0.5, size=b.shape)
    X = rng.normal(size=(int(rng.integers(1, 11)), widths[0]))
    Y = rng.uniform(0, 1, size=(X.shape[0], widths[-1]))
    return params, X, Y
