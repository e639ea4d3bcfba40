"""Guidewire shape reconstruction from orthogonal fluoroscopy masks."""

from .curve import Curve3D
from .geometry import CameraExtrinsics, CameraIntrinsics, CameraModel, default_rig
from .pipeline import reconstruct, reconstruct_sample

__version__ = "0.1.0"

__all__ = [
    "CameraExtrinsics", "CameraIntrinsics", "CameraModel", "Curve3D", "default_rig", "reconstruct",
    "reconstruct_sample",
]
