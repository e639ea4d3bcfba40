"""Convolutional shape regressor: one view mask in, ``3n`` body coordinates out."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import layers


@dataclass(frozen=True)
class Architecture:
    """Conv blocks (conv, ReLU, max-pool) followed by a ReLU + dropout MLP head."""

    input_size: tuple[int, int] = (80, 80)
    conv_channels: tuple[int, ...] = (8, 16, 32)
    kernel: int = 3
    pool: int = 2
    hidden: tuple[int, ...] = (256,)
    out_dim: int = 60
    dropout: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "input_size", tuple(int(v) for v in self.input_size))
        object.__setattr__(self, "conv_channels", tuple(int(v) for v in self.conv_channels))
        object.__setattr__(self, "hidden", tuple(int(v) for v in self.hidden))
        if self.kernel % 2 != 1:
            raise ShapeMismatch("same-padding needs an odd kernel size")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        h, w = self.input_size
        f = self.pool ** len(self.conv_channels)
        if h % f or w % f:
            raise ShapeMismatch(f"input {h}x{w} is not divisible by total pooling {f}")

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        f = self.pool ** len(self.conv_channels)
        c = self.conv_channels[-1] if self.conv_channels else 1
        return c, self.input_size[0] // f, self.input_size[1] // f

    def param_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        shapes = []
        c_in = 1
        for i, c in enumerate(self.conv_channels):
            shapes += [(f"conv{i}.weight", (c, c_in, self.kernel, self.kernel)), (f"conv{i}.bias", (c,))]
            c_in = c
        width = int(np.prod(self.feature_shape))
        for j, h in enumerate(self.hidden + (self.out_dim,)):
            shapes += [(f"fc{j}.weight", (h, width)), (f"fc{j}.bias", (h,))]
            width = h
        return shapes

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("input_size", "conv_channels", "hidden"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(**{**d, "input_size": tuple(d["input_size"]),
                      "conv_channels": tuple(d["conv_channels"]), "hidden": tuple(d["hidden"])})


class FgrnModel:
    """Architecture plus an ordered mapping of named ``float64`` parameters."""

    def __init__(self, arch: Architecture, params: dict[str, np.ndarray]):
        self.arch = arch
        expected = arch.param_shapes()
        if [n for n, _ in expected] != list(params):
            raise ShapeMismatch("parameter names do not match the architecture")
        for name, shape in expected:
            if params[name].shape != shape:
                raise ShapeMismatch(f"{name}: expected {shape}, got {params[name].shape}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @property
    def n_bodies(self) -> int:
        return self.arch.out_dim // 3

    def copy(self) -> "FgrnModel":
        return FgrnModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def parameter_count(self) -> int:
        return sum(v.size for v in self.params.values())

    def __call__(self, images):
        return forward(self, images)


def init_model(arch: Architecture = Architecture(), seed: int = 0) -> FgrnModel:
    """Fan-in-scaled uniform weights (He bound for ReLU layers), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    shapes = arch.param_shapes()
    last_weight = shapes[-2][0]
    for name, shape in shapes:
        if name.endswith("bias"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt((3.0 if name == last_weight else 6.0) / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return FgrnModel(arch, params)


def _as_batch(model, images):
    x = np.asarray(images, dtype=np.float64)
    h, w = model.arch.input_size
    if x.ndim == 2:
        x = x[None]
    if x.ndim == 3:
        x = x[:, None]
    if x.ndim != 4 or x.shape[1:] != (1, h, w):
        raise ShapeMismatch(f"expected images of shape ({h}, {w}), got {np.shape(images)}")
    return x


def forward(model: FgrnModel, images, train_mode: bool = False, rng=None, keep_masks=None, cache=None):
    """Batched forward pass returning ``(batch, out_dim)`` (or ``(out_dim,)`` for one image).

    In train mode inverted dropout is applied after every hidden layer, with
    masks drawn from ``rng`` unless ``keep_masks`` supplies them. Pass a dict
    as ``cache`` to keep the intermediates :func:`backward` needs.
    """
    single = np.ndim(images) == 2
    x = _as_batch(model, images)
    p = model.params
    arch = model.arch
    store = cache is not None
    if store:
        cache["x_shapes"], cache["cols"], cache["pre"], cache["pool_idx"] = [], [], [], []
        cache["fc_in"], cache["fc_pre"], cache["masks"] = [], [], []
    for i in range(len(arch.conv_channels)):
        if store:
            cache["x_shapes"].append(x.shape)
        z, cols = layers.conv2d_forward(x, p[f"conv{i}.weight"], p[f"conv{i}.bias"])
        a = layers.relu(z)
        x, idx = layers.maxpool_forward(a, arch.pool)
        if store:
            cache["cols"].append(cols)
            cache["pre"].append(z)
            cache["pool_idx"].append(idx)
    if store:
        cache["feature_shape"] = x.shape
    h = x.reshape(len(x), -1)
    n_fc = len(arch.hidden) + 1
    for j in range(n_fc):
        if store:
            cache["fc_in"].append(h)
        z = h @ p[f"fc{j}.weight"].T + p[f"fc{j}.bias"]
        if j == n_fc - 1:
            h = z
            break
        if store:
            cache["fc_pre"].append(z)
        h = layers.relu(z)
        mask = None
        if train_mode and arch.dropout > 0:
            if keep_masks is not None:
                mask = keep_masks[j]
            else:
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                mask = (rng.random(h.shape) >= arch.dropout) / (1.0 - arch.dropout)
            h = h * mask
        if store:
            cache["masks"].append(mask)
    return h[0] if single else h


def backward(model: FgrnModel, cache: dict, dout) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given ``dout = dL/d(output)`` for a cached forward pass."""
    p = model.params
    arch = model.arch
    grads = {}
    g = np.atleast_2d(np.asarray(dout, dtype=np.float64))
    n_fc = len(arch.hidden) + 1
    for j in reversed(range(n_fc)):
        if j < n_fc - 1:
            mask = cache["masks"][j]
            if mask is not None:
                g = g * mask
            g = layers.relu_backward(g, cache["fc_pre"][j])
        h_in = cache["fc_in"][j]
        grads[f"fc{j}.weight"] = g.T @ h_in
        grads[f"fc{j}.bias"] = g.sum(axis=0)
        g = g @ p[f"fc{j}.weight"]
    g = g.reshape(cache["feature_shape"])
    for i in reversed(range(len(arch.conv_channels))):
        z = cache["pre"][i]
        g = layers.maxpool_backward(g, cache["pool_idx"][i], z.shape, arch.pool)
        g = layers.relu_backward(g, z)
        g, dw, db = layers.conv2d_backward(g, cache["cols"][i], cache["x_shapes"][i], p[f"conv{i}.weight"])
        grads[f"conv{i}.weight"] = dw
        grads[f"conv{i}.bias"] = db
    return {name: grads[name] for name in p}
