"""Pinhole cameras, projection and two-view DLT triangulation.

World units are meters. Pixel coordinates follow the (u, v) = (column, row)
convention with pixel centers at integer positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curve import Curve3D
from .errors import (
    DegenerateGeometry,
    DegenerateProjection,
    DehomogenizationFailure,
    FluoroReconError,
    LengthMismatch,
    TriangulationError,
)

W_EPS = 1e-12
SINGULAR_GAP_RTOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True, eq=False)
class CameraExtrinsics:
    """World-to-camera rigid transform ``X_cam = R @ X_world + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation must have determinant +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def look_from(cls, center, rotation):
        """Build extrinsics from a camera center and world-to-camera rotation."""
        R = np.asarray(rotation, dtype=np.float64)
        return cls(R, -R @ np.asarray(center, dtype=np.float64))

    def matrix(self) -> np.ndarray:
        return np.hstack([self.rotation, self.translation[:, None]])

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation


@dataclass(frozen=True, eq=False)
class CameraModel:
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    image_size: tuple[int, int] = (80, 80)

    def __post_init__(self):
        w, h = (int(v) for v in self.image_size)
        if w < 1 or h < 1:
            raise ValueError("image size must be positive")
        k = self.intrinsics
        if not (0 <= k.cx <= w and 0 <= k.cy <= h):
            raise ValueError("principal point lies outside the image")
        object.__setattr__(self, "image_size", (w, h))

    def projection_matrix(self) -> np.ndarray:
        return projection_matrix(self)

    def to_dict(self) -> dict:
        k = self.intrinsics
        return {
            "intrinsics": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "skew": k.skew},
            "rotation": [float(v) for v in self.extrinsics.rotation.ravel()],
            "translation": [float(v) for v in self.extrinsics.translation],
            "image_size": list(self.image_size),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        k = d["intrinsics"]
        return cls(
            CameraIntrinsics(
                float(k["fx"]), float(k["fy"]), float(k["cx"]), float(k["cy"]),
                float(k.get("skew", 0.0)),
            ),
            CameraExtrinsics(
                np.array(d["rotation"], dtype=np.float64).reshape(3, 3),
                np.array(d["translation"], dtype=np.float64),
            ),
            tuple(int(v) for v in d["image_size"]),
        )


def projection_matrix(cam: CameraModel) -> np.ndarray:
    """Return the 3x4 matrix ``K @ [R | t]``."""
    return cam.intrinsics.matrix() @ cam.extrinsics.matrix()


def _as_homogeneous(X, size):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] == size - 1:
        X = np.concatenate([X, np.ones(X.shape[:-1] + (1,))], axis=-1)
    if X.shape[-1] != size:
        raise ValueError(f"expected {size - 1} or {size} coordinates, got {X.shape[-1]}")
    return X


def project(cam: CameraModel, X) -> np.ndarray:
    """Project a homogeneous world point, returning ``[u, v, w]``.

    ``X`` may be a 3-vector (``W = 1`` is appended) or a 4-vector.
    """
    X = _as_homogeneous(X, 4)
    if not np.any(X):
        raise ValueError("homogeneous point has all components zero")
    return projection_matrix(cam) @ X


def dehomogenize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if abs(x[-1]) < W_EPS:
        raise DegenerateProjection(f"|w| = {abs(x[-1]):.3g} is below {W_EPS}")
    return x[:-1] / x[-1]


def project_to_pixels(cam: CameraModel, points) -> np.ndarray:
    """Vectorized projection of ``(n, 3)`` world points to ``(n, 2)`` pixels."""
    pts = _as_homogeneous(np.atleast_2d(points), 4)
    x = pts @ projection_matrix(cam).T
    w = x[:, 2]
    if np.any(np.abs(w) < W_EPS):
        raise DegenerateProjection(f"point {int(np.argmax(np.abs(w) < W_EPS))} lies on the camera plane")
    return x[:, :2] / w[:, None]


def depths(cam: CameraModel, points) -> np.ndarray:
    """Camera-frame z of each world point (positive in front of the camera)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return pts @ cam.extrinsics.rotation[2] + cam.extrinsics.translation[2]


def dlt_matrix(P1, P2, x1, x2) -> np.ndarray:
    """Stack the two independent cross-product rows of each view into 4x4 A."""
    rows = []
    for P, x in ((P1, x1), (P2, x2)):
        P = np.asarray(P, dtype=np.float64)
        u, v = dehomogenize(_as_homogeneous(x, 3))
        rows.append(u * P[2] - P[0])
        rows.append(v * P[2] - P[1])
    return np.array(rows)


def triangulate_point(P1, P2, x1, x2) -> np.ndarray:
    """Linear two-view triangulation.

    Parameters
    ----------
    P1, P2 : array_like, shape (3, 4)
        Projection matrices of the two views.
    x1, x2 : array_like, shape (2,) or (3,)
        Image points, pixel or homogeneous. Homogeneous points are scaled to
        ``w = 1`` first.

    Returns
    -------
    ndarray, shape (3,)
        World point minimizing ``||A X||`` over unit homogeneous ``X``.

    Raises
    ------
    DegenerateGeometry
        The null space of ``A`` is not one-dimensional (parallel rays or
        identical cameras).
    DehomogenizationFailure
        The solution is a point at infinity.
    """
    A = dlt_matrix(P1, P2, x1, x2)
    _, s, vt = np.linalg.svd(A)
    if s[2] - s[3] <= SINGULAR_GAP_RTOL * s[0]:
        raise DegenerateGeometry(
            f"two smallest singular values {s[2]:.3g}, {s[3]:.3g} are not separated"
        )
    X = vt[-1]
    if abs(X[3]) < W_EPS:
        raise DehomogenizationFailure("triangulated point is at infinity")
    return X[:3] / X[3]


def triangulate_polyline(cam1: CameraModel, cam2: CameraModel, pts1, pts2) -> Curve3D:
    pts1 = np.asarray(pts1, dtype=np.float64)
    pts2 = np.asarray(pts2, dtype=np.float64)
    if len(pts1) != len(pts2):
        raise LengthMismatch(f"{len(pts1)} points in view 1 but {len(pts2)} in view 2")
    if len(pts1) < 2:
        raise LengthMismatch("need at least 2 corresponded points")
    P1, P2 = projection_matrix(cam1), projection_matrix(cam2)
    out = np.empty((len(pts1), 3))
    for i, (a, b) in enumerate(zip(pts1, pts2)):
        try:
            out[i] = triangulate_point(P1, P2, a, b)
        except FluoroReconError as exc:
            raise TriangulationError(i, exc) from exc
    return Curve3D(out)


# Default rig: top view looks along -Z, side view along -X, both 0.3 m from
# the workspace center at the world origin.
DEFAULT_FOCAL_PX = 175.0
DEFAULT_DISTANCE_M = 0.3
DEFAULT_IMAGE_SIZE = (80, 80)

_TOP_ROTATION = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
_SIDE_ROTATION = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]])


def default_rig(
    focal_px=DEFAULT_FOCAL_PX, distance_m=DEFAULT_DISTANCE_M, image_size=DEFAULT_IMAGE_SIZE
) -> tuple[CameraModel, CameraModel]:
    """Return the (top, side) orthogonal camera pair."""
    w, h = image_size
    k = CameraIntrinsics(focal_px, focal_px, w / 2.0, h / 2.0)
    top = CameraModel(
        k, CameraExtrinsics.look_from([0.0, 0.0, distance_m], _TOP_ROTATION), (w, h)
    )
    side = CameraModel(
        k, CameraExtrinsics.look_from([distance_m, 0.0, 0.0], _SIDE_ROTATION), (w, h)
    )
    return top, side


def rig_to_json(cams) -> str:
    top, side = cams
    return json.dumps({"top": top.to_dict(), "side": side.to_dict()}, indent=2, sort_keys=True) + "\n"


def rig_from_json(text: str) -> tuple[CameraModel, CameraModel]:
    d = json.loads(text)
    return CameraModel.from_dict(d["top"]), CameraModel.from_dict(d["side"])


def save_rig(path, cams) -> None:
    Path(path).write_text(rig_to_json(cams))


def load_rig(path) -> tuple[CameraModel, CameraModel]:
    return rig_from_json(Path(path).read_text())


def pixel_footprint(cam: CameraModel, depth: float) -> float:
    """World size in meters of one pixel at the given depth."""
    return depth / min(cam.intrinsics.fx, cam.intrinsics.fy)
