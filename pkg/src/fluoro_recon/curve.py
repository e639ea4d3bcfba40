"""Ordered 3D point sequences and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInput, DatasetFormatError

CSV_HEADER = ("x_m", "y_m", "z_m")


@dataclass(frozen=True, eq=False)
class Curve3D:
    """Guidewire shape as ordered points in meters, distal tip first."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DegenerateInput(f"expected (n, 3) points, got shape {pts.shape}")
        if len(pts) < 2:
            raise DegenerateInput("a curve needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise DegenerateInput("curve contains non-finite coordinates")
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(gaps <= 1e-12):
            bad = int(np.argmax(gaps <= 1e-12))
            raise DegenerateInput(f"points {bad} and {bad + 1} coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def tip(self) -> np.ndarray:
        return self.points[0]

    def gaps(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def polyline_length(self) -> float:
        return float(self.gaps().sum())


def curve_to_csv(curve: Curve3D) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in curve.points:
        writer.writerow([repr(float(v)) for v in p])
    return buf.getvalue()


def curve_from_csv(text: str) -> Curve3D:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
        raise DatasetFormatError(f"curve CSV must start with header {','.join(CSV_HEADER)}")
    try:
        pts = [[float(v) for v in row] for row in rows[1:] if row]
    except ValueError as exc:
        raise DatasetFormatError(f"bad number in curve CSV: {exc}") from None
    if any(len(p) != 3 for p in pts):
        raise DatasetFormatError("every curve CSV row needs exactly 3 values")
    return Curve3D(np.array(pts).reshape(-1, 3))


def write_curve(path, curve: Curve3D) -> None:
    Path(path).write_text(curve_to_csv(curve))


def read_curve(path) -> Curve3D:
    return curve_from_csv(Path(path).read_text())
