"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np


def numeric_grad(f, arr, eps=1e-5):
    """d f() / d arr by central differences, perturbing ``arr`` in place."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + eps
        fp = f()
        arr[i] = old - eps
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def max_relative_error(analytic, numeric, floor=1e-6):
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, floor).

    The floor keeps entries whose true gradient is ~0 from dominating; at
    64-bit with step 1e-5 the absolute error of a central difference is
    around 1e-10, far below it.
    """
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(loss_fn, tensors, eps=1e-5):
    """Compare analytic and numeric gradients of ``loss_fn()`` for each tensor.

    ``loss_fn`` must rebuild the graph on every call and return a scalar
    Tensor. Returns the worst relative error over all tensors.
    """
    for t in tensors:
        t.grad = None
    loss_fn().backward(inputs=tensors)
    analytic = [t.grad.copy() for t in tensors]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        num = numeric_grad(lambda: float(loss_fn().data), t.data, eps)
        worst = max(worst, max_relative_error(a, num))
    return worst
