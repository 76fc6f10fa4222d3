"""Shared helpers: finite differences and gradient comparison."""

import numpy as np


def numeric_gradient(fn, params: dict, step: float = 1e-4) -> dict:
    """Central-difference gradient of the scalar ``fn()`` w.r.t. every
    entry of every array in ``params``. Mutates each entry in place and
    restores it, so ``fn`` must read the same arrays."""
    grads = {}
    for key, p in params.items():
        g = np.zeros_like(p)
        flat, gflat = p.ravel(), g.ravel()
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            hi = fn()
            flat[i] = saved - step
            lo = fn()
            flat[i] = saved
            gflat[i] = (hi - lo) / (2.0 * step)
        grads[key] = g
    return grads


def flat_gradient(grads: dict) -> np.ndarray:
    """All gradient arrays as one vector, in sorted key order."""
    return np.concatenate([np.ravel(grads[k]) for k in sorted(grads)])


def gradient_error(analytic: dict, numeric: dict) -> float:
    """Norm of the difference relative to the larger of the two norms."""
    a, n = flat_gradient(analytic), flat_gradient(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)
