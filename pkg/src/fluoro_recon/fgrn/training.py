"""Mini-batch training loop and curve prediction."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..curve import Curve3D
from ..errors import EmptyDataset, NonFiniteLoss, ShapeMismatch
from ..spline import smooth_and_resample
from . import losses
from .model import Architecture, FgrnModel, backward, forward, init_model
from .nadam import NadamConfig, OptimizerState, nadam_step

log = logging.getLogger(__name__)

MM_PER_M = 1000.0


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0
    beta: float = 0.1
    spacing: float = 0.002  # meters; the loss works in millimeters
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    dropout: float = 0.5
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or (self.alpha == 0 and self.beta == 0):
            raise ValueError("alpha and beta must be nonnegative and not both zero")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")

    @property
    def spacing_mm(self) -> float:
        return self.spacing * MM_PER_M

    @property
    def nadam(self) -> NadamConfig:
        return NadamConfig(self.lr, self.beta1, self.beta2, self.eps)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    model: FgrnModel
    history: list[EpochRecord]
    train_indices: np.ndarray
    val_indices: np.ndarray
    state: OptimizerState = field(repr=False, default=None)


def loss_and_grads(model: FgrnModel, images, targets_mm, config: TrainConfig, rng=None, train_mode=False,
                   keep_masks=None):
    """Total loss of a batch and its exact gradient for every parameter."""
    cache = {}
    out = forward(model, images, train_mode=train_mode, rng=rng, keep_masks=keep_masks, cache=cache)
    out = np.atleast_2d(out)
    y = np.asarray(targets_mm, dtype=np.float64).reshape(out.shape)
    loss = losses.total_loss(y, out, config.alpha, config.beta, config.spacing_mm)
    dout = losses.total_loss_grad(y, out, config.alpha, config.beta, config.spacing_mm)
    return loss, backward(model, cache, dout)


def evaluate_loss(model: FgrnModel, images, targets_mm, config: TrainConfig, batch_size=256) -> float:
    total = 0.0
    for start in range(0, len(images), batch_size):
        out = forward(model, images[start : start + batch_size])
        y = targets_mm[start : start + batch_size].reshape(out.shape)
        total += losses.total_loss(y, out, config.alpha, config.beta, config.spacing_mm) * len(out)
    return total / len(images)


def split_indices(count: int, val_fraction: float, seed: int):
    order = np.random.default_rng([seed, 0]).permutation(count)
    n_val = int(math.ceil(val_fraction * count)) if val_fraction > 0 and count > 1 else 0
    n_val = min(n_val, count - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(images, targets, config: TrainConfig = TrainConfig(), arch: Architecture | None = None,
          on_epoch=None) -> TrainResult:
    """Fit a model to ``images`` ``(N, H, W)`` and ``targets`` ``(N, n, 3)`` in meters.

    A seeded ``val_fraction`` of the samples is held out. Shuffling, dropout
    and initialization all derive from ``config.seed``, so identical inputs
    give bit-identical parameters.
    """
    images = np.asarray(images, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(images) == 0:
        raise EmptyDataset("no training samples")
    if len(targets) != len(images):
        raise ShapeMismatch(f"{len(images)} images but {len(targets)} targets")
    n = targets.shape[1]
    if arch is None:
        arch = Architecture(input_size=images.shape[1:], out_dim=3 * n, dropout=config.dropout)
    if arch.out_dim != 3 * n:
        raise ShapeMismatch(f"architecture outputs {arch.out_dim} values, targets need {3 * n}")
    y_mm = targets.reshape(len(targets), -1) * MM_PER_M

    tr, va = split_indices(len(images), config.val_fraction, config.seed)
    model = init_model(arch, seed=config.seed)
    state = OptimizerState.zeros_like(model.params)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    history = []
    for epoch in range(1, config.epochs + 1):
        order = tr[shuffle_rng.permutation(len(tr))]
        seen, total = 0, 0.0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(model, images[idx], y_mm[idx], config, dropout_rng, train_mode=True)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, b)
            params, state = nadam_step(model.params, grads, state, config.nadam)
            model = FgrnModel(arch, params)
            total += loss * len(idx)
            seen += len(idx)
        eval_idx = va if len(va) else tr
        val_loss = evaluate_loss(model, images[eval_idx], y_mm[eval_idx], config)
        if not math.isfinite(val_loss):
            raise NonFiniteLoss(epoch, -1)
        rec = EpochRecord(epoch, total / seen, val_loss)
        history.append(rec)
        log.info("epoch %d train %.6g val %.6g", epoch, rec.train_loss, rec.val_loss)
        if on_epoch:
            on_epoch(rec)
    return TrainResult(model, history, tr, va, state)


def history_to_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "train_loss", "val_loss"])
    for r in history:
        w.writerow([r.epoch, repr(float(r.train_loss)), repr(float(r.val_loss))])
    return buf.getvalue()


def predict_points(model: FgrnModel, images) -> np.ndarray:
    """Raw network output as ``(batch, n, 3)`` positions in meters."""
    out = np.atleast_2d(forward(model, images))
    return out.reshape(len(out), -1, 3) / MM_PER_M


def predict_curve(model: FgrnModel, mask, smoothing: float = 0.0) -> Curve3D:
    """Predict a shape from one view mask, spline-smoothed and equal-arc resampled."""
    img = np.asarray(mask, dtype=np.float64)
    pts = predict_points(model, img[None])[0]
    return smooth_and_resample(pts, len(pts), smoothing)
