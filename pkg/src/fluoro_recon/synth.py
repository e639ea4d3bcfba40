"""Synthetic guidewire datasets: random smooth curves rendered into two views.

Each sample draws from its own random stream, derived from the dataset seed
and the sample index, so samples can be generated in any order or in
parallel and still come out identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import geometry
from .curve import Curve3D, read_curve, curve_to_csv
from .errors import (
    DatasetFormatError,
    FluoroReconError,
    OutOfFrustum,
    RejectionExhausted,
    SampleError,
)
from .parallel import parallel_map
from .skeleton import encode_pgm, read_pgm
from .spline import resample_equal_arclength, fit_spline

log = logging.getLogger(__name__)

LAYOUT_VERSION = 1
MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class CurveConfig:
    workspace_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    workspace_size: float = 0.12
    length_range: tuple[float, float] = (0.04, 0.10)
    max_curvature: float = 60.0
    n_bodies: int = 20
    spacing: float = 0.002
    radius_px: float = 1.5
    margin_px: float = 3.0
    min_projected_px: float = 10.0

    def __post_init__(self):
        if self.workspace_size <= 0:
            raise ValueError("workspace must be nonempty")
        lo, hi = self.length_range
        if not 0 < lo <= hi:
            raise ValueError("length range must be positive and ordered")
        if self.n_bodies < 2 or self.spacing <= 0:
            raise ValueError("need n_bodies >= 2 and spacing > 0")
        object.__setattr__(self, "workspace_center", tuple(float(v) for v in self.workspace_center))
        object.__setattr__(self, "length_range", (float(lo), float(hi)))

    @property
    def body_length(self) -> float:
        return (self.n_bodies - 1) * self.spacing

    def to_dict(self) -> dict:
        d = asdict(self)
        d["workspace_center"] = list(self.workspace_center)
        d["length_range"] = list(self.length_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CurveConfig":
        d = dict(d)
        d["workspace_center"] = tuple(d["workspace_center"])
        d["length_range"] = tuple(d["length_range"])
        return cls(**d)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for sample ``index`` of a dataset seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _bezier(ctrl, t):
    t = t[:, None]
    s = 1.0 - t
    return s**3 * ctrl[0] + 3 * s**2 * t * ctrl[1] + 3 * s * t**2 * ctrl[2] + t**3 * ctrl[3]


def _bezier_d1(ctrl, t):
    t = t[:, None]
    s = 1.0 - t
    return 3 * s**2 * (ctrl[1] - ctrl[0]) + 6 * s * t * (ctrl[2] - ctrl[1]) + 3 * t**2 * (ctrl[3] - ctrl[2])


def _bezier_d2(ctrl, t):
    t = t[:, None]
    return 6 * (1 - t) * (ctrl[2] - 2 * ctrl[1] + ctrl[0]) + 6 * t * (ctrl[3] - 2 * ctrl[2] + ctrl[1])


def _random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _propose(rng, cfg):
    """Cubic Bezier with the distal tip at the first control point."""
    lo, hi = cfg.length_range
    length = rng.uniform(lo, hi)
    half = cfg.workspace_size / 2
    center = np.array(cfg.workspace_center)
    ctrl = [center + rng.uniform(-half, half, size=3)]
    heading = _random_unit(rng)
    for _ in range(3):
        heading = heading + 0.8 * _random_unit(rng)
        heading /= np.linalg.norm(heading)
        ctrl.append(ctrl[-1] + heading * length / 3)
    return np.array(ctrl)


def _inside_box(points, cfg):
    half = cfg.workspace_size / 2
    return bool(np.all(np.abs(points - np.array(cfg.workspace_center)) <= half))


def _visible(points, cam, margin):
    if np.any(geometry.depths(cam, points) <= 0):
        return False
    uv = geometry.project_to_pixels(cam, points)
    w, h = cam.image_size
    return bool(
        np.all(uv >= margin) and np.all(uv[:, 0] <= w - 1 - margin) and np.all(uv[:, 1] <= h - 1 - margin)
    )


def _projection_ok(wire_pts, cam, clearance_px, min_length_px):
    """Reject projections that are too short or where distant parts of the wire touch."""
    uv = geometry.project_to_pixels(cam, wire_pts)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(uv, axis=0), axis=1))])
    if arc[-1] < min_length_px:
        return False
    near = np.linalg.norm(uv[:, None] - uv[None], axis=-1) < clearance_px
    far_along = np.abs(arc[:, None] - arc[None]) > 1.6 * clearance_px
    return not np.any(near & far_along)


def generate_wire(rng_seed, config: CurveConfig = CurveConfig(), rig=None) -> tuple[Curve3D, Curve3D]:
    """Random guidewire, returned as ``(wire, bodies)``.

    ``rng_seed`` is an int, a ``SeedSequence`` or a ``Generator``. A cubic
    Bezier is proposed and rejected until its length lies in the configured
    range, its curvature stays under the bound and it fits the workspace box.
    With a ``rig``, it must also project inside every image with a margin
    without touching itself and spanning at least ``min_projected_px``.
    ``wire`` samples the whole curve at
    ``spacing`` steps of arc length from the distal tip; ``bodies`` is its
    first ``n_bodies`` points, the ground-truth shape.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    t = np.linspace(0.0, 1.0, 4001)
    lo, hi = config.length_range
    clearance = 2 * config.radius_px + 2.0
    for _ in range(MAX_ATTEMPTS):
        ctrl = _propose(rng, config)
        pts = _bezier(ctrl, t)
        cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        if not lo <= cum[-1] <= hi or cum[-1] < config.body_length:
            continue
        d1, d2 = _bezier_d1(ctrl, t), _bezier_d2(ctrl, t)
        speed = np.linalg.norm(d1, axis=1)
        if speed.min() <= 1e-9:
            continue
        kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / speed**3
        if kappa.max() > config.max_curvature or not _inside_box(pts, config):
            continue
        # evaluate the Bezier itself at arc-length-interpolated parameters
        arc = np.arange(0.0, cum[-1] + 1e-12, config.spacing)
        wire = _bezier(ctrl, np.interp(arc, cum, t))
        if rig is not None and not all(
            _visible(wire, cam, config.margin_px)
            and _projection_ok(wire, cam, clearance, config.min_projected_px)
            for cam in rig
        ):
            continue
        return Curve3D(wire), Curve3D(wire[: config.n_bodies])
    raise RejectionExhausted(f"no admissible curve after {MAX_ATTEMPTS} attempts")


def generate_curve(rng_seed, config: CurveConfig = CurveConfig(), rig=None) -> Curve3D:
    """Ground-truth bodies of a random guidewire; see :func:`generate_wire`."""
    return generate_wire(rng_seed, config, rig)[1]


def render_mask(curve: Curve3D, cam: geometry.CameraModel, radius_px: float = 1.5):
    """Rasterize ``curve`` as a stroked line of ``radius_px`` in ``cam``.

    Returns ``(mask, tip_uv)``: a boolean ``(height, width)`` mask and the
    projected pixel position of the distal tip.
    """
    w, h = cam.image_size
    bodies_uv = _project_checked(curve.points, cam)
    dense = resample_equal_arclength(fit_spline(curve), 10 * len(curve))
    uv = _project_checked(dense.points, cam)

    a, b = uv[:-1], uv[1:]
    lo = np.floor(np.minimum(a, b).min(axis=0) - radius_px).astype(int)
    hi = np.ceil(np.maximum(a, b).max(axis=0) + radius_px).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, [w - 1, h - 1])
    cols, rows = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    px = np.column_stack([cols.ravel(), rows.ravel()]).astype(np.float64)

    ab = b - a
    denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-18)
    inside = np.zeros(len(px), dtype=bool)
    for start in range(0, len(a), 64):
        sa, sab, sd = a[start : start + 64], ab[start : start + 64], denom[start : start + 64]
        rel = px[:, None, :] - sa[None]
        t = np.clip(np.einsum("pij,ij->pi", rel, sab) / sd, 0.0, 1.0)
        d2 = np.sum((rel - t[..., None] * sab[None]) ** 2, axis=-1)
        inside |= (d2 <= radius_px**2).any(axis=1)

    mask = np.zeros((h, w), dtype=bool)
    mask[rows.ravel()[inside], cols.ravel()[inside]] = True
    return mask, bodies_uv[0].copy()


def _project_checked(points, cam):
    w, h = cam.image_size
    z = geometry.depths(cam, points)
    uv = geometry.project_to_pixels(cam, points) if np.all(z > 0) else None
    for i in range(len(points)):
        if z[i] <= 0:
            raise OutOfFrustum(i, f"body {i} is behind the camera")
        u, v = uv[i]
        if not (-0.5 <= u < w - 0.5 and -0.5 <= v < h - 0.5):
            raise OutOfFrustum(i)
    return uv


@dataclass
class GuidewireSample:
    id: int
    top_mask: np.ndarray
    side_mask: np.ndarray
    cameras: tuple
    ground_truth: Curve3D
    tip_projections: dict = field(default_factory=dict)
    seed: int = 0
    wire: Curve3D | None = None

    @property
    def name(self) -> str:
        return sample_dirname(self.id)

    def mask(self, view: str) -> np.ndarray:
        return {"top": self.top_mask, "side": self.side_mask}[view]


def sample_dirname(index: int) -> str:
    return f"sample_{index:05d}"


def generate_sample(seed: int, index: int, config: CurveConfig = CurveConfig(), rig=None) -> GuidewireSample:
    rig = rig or geometry.default_rig()
    try:
        wire, curve = generate_wire(sample_rng(seed, index), config, rig)
        top, tip_top = render_mask(wire, rig[0], config.radius_px)
        side, tip_side = render_mask(wire, rig[1], config.radius_px)
    except FluoroReconError as exc:
        raise SampleError(index, exc) from exc
    return GuidewireSample(
        index, top, side, tuple(rig), curve,
        {"top": [float(v) for v in tip_top], "side": [float(v) for v in tip_side]}, seed, wire,
    )


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class DatasetManifest:
    count: int
    seed: int
    n_bodies: int
    spacing: float
    cameras: str = "cameras.json"
    layout_version: int = LAYOUT_VERSION
    config: dict = field(default_factory=dict)
    samples: tuple[str, ...] = ()

    def to_json(self) -> str:
        d = asdict(self)
        d["samples"] = list(self.samples)
        return _dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        try:
            d = json.loads(text)
            d["samples"] = tuple(d["samples"])
            return cls(**d)
        except (ValueError, KeyError, TypeError) as exc:
            raise DatasetFormatError(f"bad manifest: {exc}") from None


def write_sample(root: Path, sample: GuidewireSample) -> None:
    d = Path(root) / sample.name
    d.mkdir(parents=True, exist_ok=True)
    (d / "top.pgm").write_bytes(encode_pgm(sample.top_mask))
    (d / "side.pgm").write_bytes(encode_pgm(sample.side_mask))
    (d / "gt.csv").write_text(curve_to_csv(sample.ground_truth))
    if sample.wire is not None:
        (d / "wire.csv").write_text(curve_to_csv(sample.wire))
    meta = {
        "id": sample.id,
        "seed": sample.seed,
        "spawn_key": [sample.id],
        "tip_top": sample.tip_projections["top"],
        "tip_side": sample.tip_projections["side"],
    }
    (d / "meta.json").write_text(_dumps(meta))


def _generate_and_write(index, seed, config, rig, root):
    sample = generate_sample(seed, index, config, rig)
    write_sample(root, sample)
    return sample.name


def generate_dataset(seed: int, count: int, config: CurveConfig, out_dir, rig=None, workers=None) -> DatasetManifest:
    """Write ``count`` samples under ``out_dir``; the manifest is written last."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rig = rig or geometry.default_rig()
    geometry.save_rig(root / "cameras.json", rig)
    job = partial(_generate_and_write, seed=seed, config=config, rig=rig, root=root)
    names = parallel_map(job, range(count), workers)
    manifest = DatasetManifest(
        count=count, seed=seed, n_bodies=config.n_bodies, spacing=config.spacing,
        config=config.to_dict(), samples=tuple(names),
    )
    (root / "manifest.json").write_text(manifest.to_json())
    log.info("wrote %d samples to %s", count, root)
    return manifest


class Dataset:
    """Read-only view of a dataset directory."""

    def __init__(self, root):
        self.root = Path(root)
        path = self.root / "manifest.json"
        if not path.is_file():
            raise DatasetFormatError(f"{path}: manifest not found")
        self.manifest = DatasetManifest.from_json(path.read_text())
        if self.manifest.layout_version != LAYOUT_VERSION:
            raise DatasetFormatError(f"unsupported layout version {self.manifest.layout_version}")
        if len(self.manifest.samples) != self.manifest.count:
            raise DatasetFormatError("manifest sample list does not match its count")
        try:
            self.rig = geometry.load_rig(self.root / self.manifest.cameras)
        except (OSError, ValueError, KeyError) as exc:
            raise DatasetFormatError(f"cannot read camera rig: {exc}") from None

    def __len__(self):
        return self.manifest.count

    def __getitem__(self, i: int) -> GuidewireSample:
        name = self.manifest.samples[i]
        d = self.root / name
        try:
            meta = json.loads((d / "meta.json").read_text())
            sample = GuidewireSample(
                int(meta["id"]),
                read_pgm(d / "top.pgm"),
                read_pgm(d / "side.pgm"),
                self.rig,
                read_curve(d / "gt.csv"),
                {"top": list(meta["tip_top"]), "side": list(meta["tip_side"])},
                int(meta["seed"]),
                read_curve(d / "wire.csv") if (d / "wire.csv").is_file() else None,
            )
        except (OSError, ValueError, KeyError, FluoroReconError) as exc:
            raise DatasetFormatError(f"{d}: {exc}") from None
        if len(sample.ground_truth) != self.manifest.n_bodies:
            raise DatasetFormatError(f"{d}: expected {self.manifest.n_bodies} bodies")
        return sample

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def config(self) -> CurveConfig:
        return CurveConfig.from_dict(self.manifest.config)

    def validate(self) -> None:
        """Parse every listed sample, raising ``DatasetFormatError`` on the first bad one."""
        for i in range(len(self)):
            self[i]


def load_dataset(root, validate: bool = True) -> Dataset:
    ds = Dataset(root)
    if validate:
        ds.validate()
    return ds
