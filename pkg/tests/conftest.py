import numpy as np
import pytest

from fluoro_recon import geometry, synth

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def rig():
    return geometry.default_rig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Twelve-sample dataset on disk, shared by CLI and workflow tests."""
    root = tmp_path_factory.mktemp("small_ds")
    synth.generate_dataset(7, 12, synth.CurveConfig(), root, workers=1)
    return synth.load_dataset(root)


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.append((props["criterion"], report.outcome, props.get("measured", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, measured in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"{verdict}  {name}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
