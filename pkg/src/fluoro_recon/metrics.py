"""Curve-to-curve shape error metrics.

All metrics take index-paired point arrays in meters and report millimeters.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curve import Curve3D
from .spline import smooth_and_resample

M_TO_MM = 1000.0


def correspond(a: Curve3D, b: Curve3D, n: int = 20):
    """Resample both curves to ``n`` equal-arc-length points, distal first."""
    ra = smooth_and_resample(a, n).points
    rb = smooth_and_resample(b, n).points
    return ra, rb


def pointwise_errors(pairs) -> np.ndarray:
    a, b = (np.asarray(p, dtype=np.float64) for p in pairs)
    if a.shape != b.shape:
        raise ValueError(f"paired arrays differ in shape: {a.shape} vs {b.shape}")
    return np.linalg.norm(a - b, axis=1) * M_TO_MM


def max_ed(pairs) -> float:
    return float(pointwise_errors(pairs).max())


def mete(pairs) -> float:
    """Tip error: distance between the index-0 (distal) pair."""
    return float(pointwise_errors(pairs)[0])


def mers(pairs) -> float:
    return float(np.mean(pointwise_errors(pairs)))


def segment_error_profile(dataset_pairs) -> np.ndarray:
    """Per-index mean error over samples, distal (index 0) to proximal."""
    errs = np.array([pointwise_errors(p) for p in dataset_pairs])
    return _stable_mean(errs, axis=0)


def _stable_mean(values, axis=0):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[axis]
    return np.apply_along_axis(math.fsum, axis, values) / n


def profile_to_csv(profile, method: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment", "mean_error_mm"] + (["method"] if method else []))
    for i, v in enumerate(profile):
        w.writerow([i, repr(float(v))] + ([method] if method else []))
    return buf.getvalue()


@dataclass
class SampleMetrics:
    sample: str
    max_ed: float
    mete: float
    mers: float
    errors: np.ndarray = field(repr=False)


def sample_metrics(name: str, pairs) -> SampleMetrics:
    e = pointwise_errors(pairs)
    return SampleMetrics(name, float(e.max()), float(e[0]), float(np.mean(e)), e)


@dataclass
class ShapeErrorReport:
    method: str
    samples: list[SampleMetrics]

    def _stat(self, attr):
        vals = np.array([getattr(s, attr) for s in self.samples])
        mean = math.fsum(vals) / len(vals)
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        return mean, std

    @property
    def max_ed(self):
        return self._stat("max_ed")

    @property
    def mete(self):
        return self._stat("mete")

    @property
    def mers(self):
        return self._stat("mers")

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    def profile(self) -> np.ndarray:
        return _stable_mean([s.errors for s in self.samples], axis=0)

    def aggregate(self) -> dict:
        out = {"method": self.method, "samples": self.sample_count}
        for key in ("max_ed", "mete", "mers"):
            mean, std = getattr(self, key)
            out[key] = {"mean_mm": mean, "std_mm": std}
        return out

    def table_row(self) -> str:
        cells = [f"{m:.3f} ± {s:.3f}" for m, s in (self.max_ed, self.mete, self.mers)]
        return f"{self.method:<15}" + "".join(f"{c:>18}" for c in cells)


def evaluate(method: str, named_pairs) -> ShapeErrorReport:
    return ShapeErrorReport(method, [sample_metrics(name, p) for name, p in named_pairs])


def format_table(reports) -> str:
    header = f"{'':<15}" + "".join(f"{h:>18}" for h in ("MaxED (mm)", "METE (mm)", "MERS (mm)"))
    return "\n".join([header] + [r.table_row() for r in reports]) + "\n"


def report_to_json(reports) -> str:
    doc = {
        "aggregate": [r.aggregate() for r in reports],
        "samples": {
            r.method: [
                {"sample": s.sample, "max_ed_mm": s.max_ed, "mete_mm": s.mete, "mers_mm": s.mers}
                for s in r.samples
            ]
            for r in reports
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "sample", "max_ed_mm", "mete_mm", "mers_mm"])
    for r in reports:
        for s in r.samples:
            w.writerow([r.method, s.sample, repr(s.max_ed), repr(s.mete), repr(s.mers)])
    return buf.getvalue()
