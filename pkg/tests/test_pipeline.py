import numpy as np
import pytest

from fluoro_recon import geometry, metrics, synth
from fluoro_recon.curve import Curve3D, curve_from_csv, curve_to_csv
from fluoro_recon.errors import DegenerateInput
from fluoro_recon.pipeline import StageError, reconstruct, reconstruct_sample


def test_curve_validation():
    with pytest.raises(DegenerateInput):
        Curve3D(np.zeros((1, 3)))
    with pytest.raises(DegenerateInput):
        Curve3D([[0, 0, 0], [0, 0, 0]])
    with pytest.raises(DegenerateInput):
        Curve3D([[0, 0, 0], [np.nan, 0, 0]])
    c = Curve3D([[0, 0, 0], [0.003, 0.004, 0]])
    assert c.polyline_length() == pytest.approx(0.005)
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


def test_curve_csv_round_trip_is_exact(rng):
    c = Curve3D(np.cumsum(rng.normal(0, 0.002, (20, 3)), axis=0))
    text = curve_to_csv(c)
    assert text.splitlines()[0] == "x_m,y_m,z_m"
    assert curve_from_csv(text).points.tobytes() == c.points.tobytes()


def test_reconstruct_sample_recovers_ground_truth():
    s = synth.generate_sample(31, 0)
    rec = reconstruct_sample(s)
    assert len(rec.curve) == len(s.ground_truth)
    assert len(rec.top_points) == len(rec.side_points) == 50
    np.testing.assert_allclose(rec.curve.gaps(), 0.002, rtol=0.02)
    pairs = metrics.correspond(s.ground_truth, rec.curve)
    assert metrics.mete(pairs) < 3.0
    for uv, cam in zip(rec.reprojections(s.cameras), s.cameras):
        direct = geometry.project_to_pixels(cam, rec.curve.points)
        np.testing.assert_allclose(uv, direct)


def test_reconstruct_whole_wire_without_spacing():
    s = synth.generate_sample(31, 1)
    rec = reconstruct(s.top_mask, s.side_mask, s.cameras, 20, s.tip_projections["top"],
                      s.tip_projections["side"])
    length = rec.curve.polyline_length()
    assert length == pytest.approx(s.wire.polyline_length(), rel=0.1)


def test_stage_errors_name_the_stage(rig):
    s = synth.generate_sample(31, 2)
    blank = np.zeros((80, 80), bool)
    with pytest.raises(StageError) as info:
        reconstruct(blank, s.side_mask, rig)
    assert info.value.stage == "skeleton(top)"
    with pytest.raises(StageError) as info:
        reconstruct(s.top_mask, blank, rig)
    assert info.value.stage == "skeleton(side)"
    with pytest.raises(StageError) as info:
        reconstruct(s.top_mask, s.top_mask, (rig[0], rig[0]))
    assert info.value.stage == "triangulate"
