"""Forward/backward kernels for the fixed conv-pool-linear layer family.

Tensors are ``float64`` in NCHW layout. Convolutions use same-padding with
odd square kernels and stride 1; pooling uses non-overlapping square windows.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_forward(x, w, b):
    B, C, H, W = x.shape
    O, Cw, k, _ = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # B, C, H, W, k, k
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * H * W, C * k * k)
    out = cols @ w.reshape(O, -1).T + b
    return out.reshape(B, H, W, O).transpose(0, 3, 1, 2), cols


def conv2d_backward(dout, cols, x_shape, w):
    B, C, H, W = x_shape
    O, _, k, _ = w.shape
    pad = k // 2
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, O)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(O, -1)).reshape(B, H, W, C, k, k)
    dxp = np.zeros((B, C, H + 2 * pad, W + 2 * pad))
    for i in range(k):
        for j in range(k):
            dxp[:, :, i : i + H, j : j + W] += dcols[..., i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad : pad + H, pad : pad + W] if pad else dxp
    return dx, dw, db


def maxpool_forward(x, p):
    B, C, H, W = x.shape
    win = x.reshape(B, C, H // p, p, W // p, p).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // p, W // p, p * p)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(dout, idx, x_shape, p):
    B, C, H, W = x_shape
    dwin = np.zeros((B, C, H // p, W // p, p * p))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    return dwin.reshape(B, C, H // p, W // p, p, p).transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(dout, pre):
    # subgradient 0 at the kink
    return dout * (pre > 0)
