"""Dataset-level flows shared by the CLI: reconstruct, train, evaluate."""

from __future__ import annotations

import logging
from functools import partial

import numpy as np

from . import metrics
from .curve import Curve3D
from .fgrn.model import FgrnModel
from .fgrn.training import TrainConfig, TrainResult, predict_curve, train
from .parallel import parallel_map
from .pipeline import DEFAULT_VIEW_SAMPLES, reconstruct_sample
from .synth import Dataset

log = logging.getLogger(__name__)

VIEWS = ("top", "side")


def _reconstruct_one(index, root, spacing, smoothing, view_samples):
    sample = Dataset(root)[index]
    rec = reconstruct_sample(sample, spacing=spacing, smoothing=smoothing, view_samples=view_samples)
    return rec.curve.points


def reconstruct_dataset(dataset: Dataset, spacing=None, smoothing=0.0, view_samples=DEFAULT_VIEW_SAMPLES,
                        indices=None, workers=None) -> list[Curve3D]:
    """Triangulated curves for every sample (or ``indices``), in order."""
    spacing = dataset.manifest.spacing if spacing is None else spacing
    idx = range(len(dataset)) if indices is None else indices
    job = partial(_reconstruct_one, root=dataset.root, spacing=spacing, smoothing=smoothing,
                  view_samples=view_samples)
    return [Curve3D(p) for p in parallel_map(job, idx, workers)]


def load_images(dataset: Dataset, view: str, indices=None) -> np.ndarray:
    if view not in VIEWS:
        raise ValueError(f"view must be one of {VIEWS}")
    idx = range(len(dataset)) if indices is None else indices
    return np.array([dataset[i].mask(view) for i in idx], dtype=np.float64)


def train_on_dataset(dataset: Dataset, view: str = "top", config: TrainConfig = TrainConfig(),
                     targets: str = "reconstruction", on_epoch=None, workers=None) -> TrainResult:
    """Train on one view; targets are triangulated curves unless ``targets='ground_truth'``."""
    images = load_images(dataset, view)
    if targets == "reconstruction":
        curves = reconstruct_dataset(dataset, workers=workers)
    elif targets == "ground_truth":
        curves = [s.ground_truth for s in dataset]
    else:
        raise ValueError("targets must be 'reconstruction' or 'ground_truth'")
    y = np.array([c.points for c in curves])
    return train(images, y, config, on_epoch=on_epoch)


def evaluate_dataset(dataset: Dataset, model: FgrnModel | None = None, view: str = "top",
                     indices=None, n: int | None = None, predictor=None, workers=None):
    """Score the triangulation pipeline and (optionally) a predictor against ground truth.

    ``predictor`` maps a sample to a :class:`Curve3D`; by default it is
    ``model`` applied to the ``view`` mask. Returns the list of reports,
    ``Reconstruction`` first.
    """
    idx = list(range(len(dataset)) if indices is None else indices)
    n = n or dataset.manifest.n_bodies
    recs = reconstruct_dataset(dataset, indices=idx, workers=workers)
    samples = [dataset[i] for i in idx]
    rec_pairs = [(s.name, metrics.correspond(s.ground_truth, r, n)) for s, r in zip(samples, recs)]
    reports = [metrics.evaluate("Reconstruction", rec_pairs)]
    if predictor is None and model is not None:
        predictor = lambda s: predict_curve(model, s.mask(view))  # noqa: E731
    if predictor is not None:
        pairs = [(s.name, metrics.correspond(s.ground_truth, predictor(s), n)) for s in samples]
        reports.append(metrics.evaluate("3D-FGRN", pairs))
    return reports
