import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from fluoro_recon import cli, geometry, metrics
from fluoro_recon.curve import read_curve
from fluoro_recon.workflows import evaluate_dataset


def digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(p.name.encode() + p.read_bytes())
    return h.hexdigest()


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.mark.parametrize("command", ["generate", "reconstruct", "train", "eval"])
def test_help_documents_every_flag(command, capsys):
    assert run(command, "--help") == 0
    out = capsys.readouterr().out
    parser = cli.build_parser()
    sub = next(a for a in parser._actions if a.dest == "command").choices[command]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in out
        if action.default not in (None, False) and action.default != "==SUPPRESS==" and action.option_strings:
            assert "default" in out


def test_usage_errors_exit_1(capsys):
    assert run() == 1
    assert run("generate", "--count", "3") == 1
    assert run("generate", "--out", "x", "--count", "many") == 1
    assert run("train", "--dataset", "d", "--out", "m", "--view", "front") == 1
    assert "error" in capsys.readouterr().err


def test_generate_is_byte_deterministic(tmp_path):
    assert run("generate", "--out", tmp_path / "a", "--count", 3, "--seed", 5, "-q") == 0
    assert run("generate", "--out", tmp_path / "b", "--count", 3, "--seed", 5, "-q") == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["count"] == 3 and manifest["seed"] == 5


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"generate": {"count": 2, "seed": 8, "bodies": 12}}))
    assert run("--config", cfg, "generate", "--out", tmp_path / "d", "--bodies", 10, "-q") == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert (manifest["count"], manifest["seed"], manifest["n_bodies"]) == (2, 8, 10)
    cfg.write_text(json.dumps({"generate": {"colour": "red"}}))
    assert run("--config", cfg, "generate", "--out", tmp_path / "e", "--count", 1) == 1


def test_resolved_config_is_logged(tmp_path, capsys):
    assert run("generate", "--out", tmp_path / "d", "--count", 1) == 0
    err = capsys.readouterr().err
    assert "resolved config" in err and '"count": 1' in err


def test_reconstruct_writes_curve_and_reprojections(small_dataset, tmp_path):
    root = small_dataset.root / "sample_00002"
    meta = json.loads((root / "meta.json").read_text())
    out = tmp_path / "curve.csv"
    code = run(
        "reconstruct", "--top", root / "top.pgm", "--side", root / "side.pgm",
        "--cameras", small_dataset.root / "cameras.json", "--out", out,
        "--tip-top", "{},{}".format(*meta["tip_top"]), "--tip-side", "{},{}".format(*meta["tip_side"]), "-q",
    )
    assert code == 0
    curve = read_curve(out)
    assert len(curve) == 20
    gt = small_dataset[2].ground_truth
    assert metrics.mete(metrics.correspond(gt, curve)) < 5.0
    for view in ("top", "side"):
        rows = list(csv.reader((tmp_path / f"curve_reproj_{view}.csv").open()))
        assert rows[0] == ["u_px", "v_px"] and len(rows) == 21


def test_reconstruct_reports_failing_stage(small_dataset, tmp_path, capsys):
    from fluoro_recon.skeleton import write_pgm

    blank = tmp_path / "blank.pgm"
    write_pgm(blank, np.zeros((80, 80), bool))
    root = small_dataset.root / "sample_00000"
    code = run("reconstruct", "--top", blank, "--side", root / "side.pgm",
               "--cameras", small_dataset.root / "cameras.json", "--out", tmp_path / "c.csv")
    assert code == 2
    assert "skeleton(top)" in capsys.readouterr().err
    code = run("reconstruct", "--top", tmp_path / "missing.pgm", "--side", root / "side.pgm",
               "--cameras", small_dataset.root / "cameras.json", "--out", tmp_path / "c.csv")
    assert code == 2


def test_train_then_eval(small_dataset, tmp_path, capsys):
    model = tmp_path / "m.fgrn"
    assert run("train", "--dataset", small_dataset.root, "--out", model, "--epochs", 2, "--seed", 1, "-q") == 0
    history = (tmp_path / "m.fgrn.history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,val_loss" and len(history) == 3
    first = model.read_bytes()
    assert run("train", "--dataset", small_dataset.root, "--out", model, "--epochs", 2, "--seed", 1, "-q") == 0
    assert model.read_bytes() == first

    report, profile = tmp_path / "r.json", tmp_path / "p.csv"
    capsys.readouterr()
    assert run("eval", "--model", model, "--dataset", small_dataset.root,
               "--out-report", report, "--out-profile", profile, "--split", "val", "-q") == 0
    table = capsys.readouterr().out.splitlines()
    assert table[1].startswith("Reconstruction") and table[2].startswith("3D-FGRN")
    doc = json.loads(report.read_text())
    assert [a["method"] for a in doc["aggregate"]] == ["Reconstruction", "3D-FGRN"]
    assert doc["aggregate"][0]["samples"] == 2
    rows = list(csv.reader(profile.open()))
    assert rows[0] == ["segment", "mean_error_mm", "method"] and len(rows) == 41


def test_eval_without_model(small_dataset, tmp_path):
    assert run("eval", "--dataset", small_dataset.root, "--out-report", tmp_path / "r.json",
               "--out-profile", tmp_path / "p.csv", "--out-csv", tmp_path / "s.csv", "-q") == 0
    doc = json.loads((tmp_path / "r.json").read_text())
    assert len(doc["aggregate"]) == 1 and doc["aggregate"][0]["samples"] == 12
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 13


def test_eval_malformed_dataset_exit_2(tmp_path, capsys):
    (tmp_path / "manifest.json").write_text("[]")
    code = run("eval", "--dataset", tmp_path, "--out-report", tmp_path / "r", "--out-profile", tmp_path / "p")
    assert code == 2
    assert "manifest" in capsys.readouterr().err


def test_ground_truth_predictor_scores_zero(small_dataset):
    _, net = evaluate_dataset(small_dataset, predictor=lambda s: s.ground_truth)
    for mean, std in (net.max_ed, net.mete, net.mers):
        assert mean == pytest.approx(0.0, abs=1e-9) and std == pytest.approx(0.0, abs=1e-9)


def test_thread_cap_env(monkeypatch):
    from fluoro_recon import parallel

    monkeypatch.setenv("FLUORO_RECON_THREADS", "1")
    assert parallel.worker_count() == 1
    assert parallel.parallel_map(abs, [-1, 2, -3]) == [1, 2, 3]


def test_cameras_flag_for_generate(tmp_path):
    rig = geometry.default_rig(focal_px=150.0)
    geometry.save_rig(tmp_path / "rig.json", rig)
    assert run("generate", "--out", tmp_path / "d", "--count", 1, "--cameras", tmp_path / "rig.json", "-q") == 0
    back = geometry.load_rig(tmp_path / "d" / "cameras.json")
    assert back[0].intrinsics.fx == 150.0
