"""Training objective: Huber data term plus inter-body spacing penalty.

Positions are in millimeters, so the Huber transition at a residual of 1
means 1 mm and the nominal spacing is 2 mm.
"""

from __future__ import annotations

import numpy as np

HUBER_DELTA = 1.0


def huber_loss(y, yhat) -> float:
    """Mean over all components of the unit-threshold Huber penalty."""
    r = np.asarray(y, dtype=np.float64) - np.asarray(yhat, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empty input")
    a = np.abs(r)
    return float(np.mean(np.where(a < HUBER_DELTA, 0.5 * r * r, a - 0.5)))


def huber_grad(y, yhat) -> np.ndarray:
    """Gradient of :func:`huber_loss` with respect to ``yhat``."""
    r = np.asarray(y, dtype=np.float64) - np.asarray(yhat, dtype=np.float64)
    g = np.where(np.abs(r) < HUBER_DELTA, -r, -np.sign(r))
    return g / r.size


def _as_points(yhat):
    p = np.asarray(yhat, dtype=np.float64)
    if p.ndim == 1:
        if p.size % 3:
            raise ValueError("flat position vector length must be a multiple of 3")
        p = p.reshape(-1, 3)
    if p.shape[-1] != 3 or p.shape[-2] < 2:
        raise ValueError("need at least 2 three-dimensional points")
    return p


def spacing_regularizer(yhat, s: float) -> float:
    """Mean absolute deviation of consecutive point distances from ``s``.

    ``yhat`` is ``(n, 3)``, a flat ``3n`` vector, or a ``(batch, n, 3)`` stack
    (averaged over the batch).
    """
    p = _as_points(yhat)
    gaps = np.linalg.norm(np.diff(p, axis=-2), axis=-1)
    return float(np.mean(np.abs(gaps - s)))


def spacing_regularizer_grad(yhat, s: float) -> np.ndarray:
    shape = np.shape(yhat)
    p = _as_points(yhat)
    d = np.diff(p, axis=-2)
    gaps = np.linalg.norm(d, axis=-1, keepdims=True)
    unit = np.divide(d, gaps, out=np.zeros_like(d), where=gaps > 0)
    g_gap = np.sign(gaps - s) * unit / gaps.size
    g = np.zeros_like(p)
    g[..., 1:, :] += g_gap
    g[..., :-1, :] -= g_gap
    return g.reshape(shape)


def total_loss(y, yhat, alpha=1.0, beta=0.1, s=2.0) -> float:
    """``alpha * huber + beta * spacing``; ``y``/``yhat`` are flat ``3n`` or batched ``(B, 3n)``."""
    yhat = np.asarray(yhat, dtype=np.float64)
    reg = spacing_regularizer(yhat.reshape(yhat.shape[:-1] + (-1, 3)), s) if beta else 0.0
    return alpha * huber_loss(y, yhat) + beta * reg


def total_loss_grad(y, yhat, alpha=1.0, beta=0.1, s=2.0) -> np.ndarray:
    yhat = np.asarray(yhat, dtype=np.float64)
    g = alpha * huber_grad(y, yhat)
    if beta:
        pts = yhat.reshape(yhat.shape[:-1] + (-1, 3))
        g = g + beta * spacing_regularizer_grad(pts, s).reshape(yhat.shape)
    return g
