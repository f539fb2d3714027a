"""Central finite differences with one Richardson step, vectorised over point batches.

Every function takes points of shape (..., n) and a callable that maps such
arrays to values of shape (...) (or (..., n) for gradients).
"""

from __future__ import annotations

import numpy as np


def _steps(x: np.ndarray, h) -> np.ndarray:
    return np.broadcast_to(np.asarray(h, dtype=float), x.shape[:-1])[..., None]


def gradient(f, x: np.ndarray, h) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n)

    def central(step):
        cols = [(f(x + step * e) - f(x - step * e)) / (2 * step[..., 0]) for e in eye]
        return np.stack(cols, axis=-1)

    s = _steps(x, h)
    return (4 * central(s / 2) - central(s)) / 3


def hessian_from_gradient(grad, x: np.ndarray, h) -> np.ndarray:
    """Differentiate an analytic gradient; the result is symmetrised."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n)

    def central(step):
        rows = [(grad(x + step * e) - grad(x - step * e)) / (2 * step) for e in eye]
        return np.stack(rows, axis=-2)

    s = _steps(x, h)
    hs = (4 * central(s / 2) - central(s)) / 3
    return 0.5 * (hs + np.swapaxes(hs, -1, -2))


def hessian(f, x: np.ndarray, h) -> np.ndarray:
    """Second differences of a scalar function (no analytic gradient available)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n)

    def central(step):
        sc = step[..., 0]
        f0 = f(x)
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            ei = step * eye[i]
            out[..., i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / sc**2
            for j in range(i + 1, n):
                ej = step * eye[j]
                val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * sc**2)
                out[..., i, j] = out[..., j, i] = val
        return out

    s = _steps(x, h)
    return (4 * central(s / 2) - central(s)) / 3


def laplacian(f, x: np.ndarray, h) -> np.ndarray:
    """Plain second-order central Laplacian (no extrapolation; used by residual oracles)."""
    x = np.asarray(x, dtype=float)
    s = _steps(x, h)
    f0 = f(x)
    total = np.zeros_like(f0)
    for e in np.eye(x.shape[-1]):
        total = total + (f(x + s * e) - 2 * f0 + f(x - s * e))
    return total / s[..., 0] ** 2
