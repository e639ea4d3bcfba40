"""Two-view reconstruction: masks in, resampled 3D curve out."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .curve import Curve3D
from .errors import FluoroReconError
from .skeleton import extract_backbone
from .spline import smooth_and_resample


class StageError(FluoroReconError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class Reconstruction:
    curve: Curve3D
    top_points: np.ndarray
    side_points: np.ndarray
    raw: Curve3D

    def reprojections(self, rig):
        return tuple(geometry.project_to_pixels(cam, self.curve.points) for cam in rig)


DEFAULT_VIEW_SAMPLES = 50


def reconstruct(top_mask, side_mask, rig, n_bodies=20, tip_top=None, tip_side=None,
                smoothing=0.0, view_samples=DEFAULT_VIEW_SAMPLES, spacing=None) -> Reconstruction:
    """Skeletonize both views, pair samples by index, triangulate and resample.

    Each view is sampled at ``view_samples`` points of equal image arc length
    from the distal tip. With ``spacing`` the output covers only the distal
    ``(n_bodies - 1) * spacing`` meters of the reconstructed wire; otherwise
    the whole wire is resampled to ``n_bodies`` points.
    """
    m = max(view_samples or n_bodies, 2)
    try:
        top_pts = extract_backbone(top_mask, m, tip_top)
    except FluoroReconError as exc:
        raise StageError("skeleton(top)", exc) from exc
    try:
        side_pts = extract_backbone(side_mask, m, tip_side)
    except FluoroReconError as exc:
        raise StageError("skeleton(side)", exc) from exc
    try:
        raw = geometry.triangulate_polyline(rig[0], rig[1], top_pts, side_pts)
    except FluoroReconError as exc:
        raise StageError("triangulate", exc) from exc
    try:
        length = None if spacing is None else (n_bodies - 1) * spacing
        curve = smooth_and_resample(raw, n_bodies, smoothing, length)
    except FluoroReconError as exc:
        raise StageError("spline", exc) from exc
    return Reconstruction(curve, top_pts, side_pts, raw)


def reconstruct_sample(sample, n_bodies=None, spacing=0.002, smoothing=0.0,
                       view_samples=DEFAULT_VIEW_SAMPLES) -> Reconstruction:
    n = n_bodies or len(sample.ground_truth)
    return reconstruct(
        sample.top_mask, sample.side_mask, sample.cameras, n,
        sample.tip_projections["top"], sample.tip_projections["side"], smoothing,
        view_samples, spacing,
    )
