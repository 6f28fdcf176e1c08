import numpy as np
import pytest

from shotkit.describer import Describer
from shotkit.kinematics import forward_kinematics, load_skeleton, rotate_yaw


@pytest.fixture(scope="session")
def skeleton():
    return load_skeleton()


@pytest.fixture(scope="session")
def describer(skeleton):
    return Describer.default(skeleton=skeleton)


def random_pose(rng, skeleton, spread=0.6, yaw=True, shift=True):
    """FK pose from random joint rotations, optionally turned and moved."""
    rot = rng.normal(scale=spread, size=(skeleton.num_joints, 3))
    rot[0] = 0.0
    pose = forward_kinematics(rot, skeleton)
    if yaw:
        pose = rotate_yaw(pose, rng.uniform(-np.pi, np.pi))
    if shift:
        pose = pose + rng.normal(scale=2.0, size=3) * np.array([1.0, 0.0, 1.0])
    return pose


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance report

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by a test")


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    number, title = mark
    passed = report.passed if report.when == "call" else not report.failed
    prev = _criteria.get(number, (title, True))
    _criteria[number] = (title, prev[1] and passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, passed = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
