"""Parametric spline fitting of 3D point sequences and arc-length resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline, make_interp_spline, splprep

from .curve import Curve3D
from .errors import DegenerateInput

ARC_LENGTH_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class SplineModel:
    """Per-coordinate B-spline over normalized chord-length parameter ``[0, 1]``.

    ``coefficients`` has shape ``(n_coef, 3)``. ``params`` keeps the parameter
    value of every fitted input point.
    """

    knots: np.ndarray
    coefficients: np.ndarray
    degree: int
    smoothing: float
    params: np.ndarray

    def __post_init__(self):
        for name in ("knots", "coefficients", "params"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def bspline(self) -> BSpline:
        return BSpline(self.knots, self.coefficients, self.degree, extrapolate=False)

    def __call__(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        return self.bspline(u)

    def derivative(self, u) -> np.ndarray:
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        return self.bspline.derivative()(u)

    def to_dict(self) -> dict:
        return {
            "degree": int(self.degree),
            "smoothing": float(self.smoothing),
            "knots": [float(v) for v in self.knots],
            "coefficients": [[float(v) for v in row] for row in self.coefficients],
            "params": [float(v) for v in self.params],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplineModel":
        return cls(
            np.array(d["knots"]), np.array(d["coefficients"]).reshape(-1, 3),
            int(d["degree"]), float(d["smoothing"]), np.array(d["params"]),
        )


def chord_parameters(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    if cum[-1] <= 0:
        raise DegenerateInput("all points coincide")
    return cum / cum[-1]


def fit_spline(curve: Curve3D | np.ndarray, smoothing: float = 0.0) -> SplineModel:
    """Fit a cubic spline through ordered 3D points.

    With ``smoothing == 0`` the spline interpolates every point. Otherwise the
    FITPACK smoothing criterion is used: the sum of squared residuals over all
    three coordinates is kept at or below ``smoothing`` with the fewest knots.
    Fewer than 4 points fall back to an interpolating polynomial of degree
    ``n - 1``.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    pts = np.asarray(curve.points if isinstance(curve, Curve3D) else curve, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
        raise DegenerateInput("need at least 2 three-dimensional points")
    if np.ptp(pts, axis=0).max() == 0:
        raise DegenerateInput("all points coincide")
    u = chord_parameters(pts)
    if np.any(np.diff(u) <= 0):
        raise DegenerateInput("consecutive points coincide")
    k = min(3, len(pts) - 1)

    if smoothing == 0 or k < 3:
        spl = make_interp_spline(u, pts, k=k)
        return SplineModel(spl.t, spl.c, k, 0.0 if k < 3 else float(smoothing), u)

    target = float(smoothing)
    for _ in range(20):
        ((t, c, deg), _), *_ = splprep(pts.T, u=u, k=3, s=target, quiet=1, full_output=1)
        coef = np.column_stack(c)[: len(t) - deg - 1]
        model = SplineModel(t, coef, deg, float(smoothing), u)
        if residual_sum_of_squares(model, pts) <= smoothing:
            return model
        # FITPACK accepts |fp - s| <= 0.001 s; tighten until the bound holds.
        target *= 0.998
    return model


def residual_sum_of_squares(spl: SplineModel, points) -> float:
    pts = np.asarray(points.points if isinstance(points, Curve3D) else points)
    return float(np.sum((spl(spl.params) - pts) ** 2))


def _gauss_length(spl, edges, order=8):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    speed = np.linalg.norm(spl.derivative(nodes.ravel()), axis=1).reshape(nodes.shape)
    return float(np.sum(0.5 * (b - a) * speed * w))


def arc_length(spl: SplineModel, tol: float = ARC_LENGTH_TOL) -> float:
    """Total arc length by composite Gauss-Legendre quadrature, refined until stable."""
    breaks = np.unique(np.clip(spl.knots, 0.0, 1.0))
    edges = breaks
    prev = _gauss_length(spl, edges)
    for _ in range(30):
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[:-1] + edges[1:])]))
        cur = _gauss_length(spl, edges)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    return cur


def dense_arclength_table(spl: SplineModel, samples: int):
    """Parameter grid and cumulative trapezoidal arc length of the speed."""
    u = np.linspace(0.0, 1.0, samples)
    speed = np.linalg.norm(spl.derivative(u), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(u))])
    return u, cum


def resample_equal_arclength(
    spl: SplineModel, n: int, samples: int | None = None, length: float | None = None
) -> Curve3D:
    """``n`` points at equal arc-length spacing, first and last at the spline ends.

    With ``length`` only the first ``length`` meters of arc from the start are
    resampled (the whole spline if it is shorter).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    samples = samples or max(1000, 50 * n)
    u, cum = dense_arclength_table(spl, samples)
    end = cum[-1] if length is None else min(float(length), cum[-1])
    u_new = np.interp(np.linspace(0.0, end, n), cum, u)
    u_new[0] = 0.0
    if end == cum[-1]:
        u_new[-1] = 1.0
    return Curve3D(spl(u_new))


def smooth_and_resample(
    curve: Curve3D | np.ndarray, n: int, smoothing: float = 0.0, length: float | None = None
) -> Curve3D:
    return resample_equal_arclength(fit_spline(curve, smoothing), n, length=length)
