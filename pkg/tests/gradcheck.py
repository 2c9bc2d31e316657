"""Central finite-difference gradient oracle, independent of the autodiff."""

import numpy as np


def numeric_gradient(f, arr, eps=1e-5):
    """d f() / d arr by central differences, perturbing arr in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = arr[idx]
        arr[idx] = saved + eps
        fp = f()
        arr[idx] = saved - eps
        fm = f()
        arr[idx] = saved
        grad[idx] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(a, b):
    denom = max(1.0, float(np.linalg.norm(a)), float(np.linalg.norm(b)))
    return float(np.linalg.norm(a - b)) / denom
