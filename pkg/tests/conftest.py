import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from signkit.pose import ComponentSpec, PoseBody, PoseSequence, load_layout

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


def random_pose(rng, header, n_frames, absent_rate=0.2):
    """Random valid pose on ``header``: float32-exact values, some keypoints absent."""
    k, d = header.total_points, header.dims
    frames = rng.normal(0, 1, size=(n_frames, k, d)).astype(np.float32).astype(np.float64)
    conf = rng.uniform(0.05, 1, size=(n_frames, k)).astype(np.float32).astype(np.float64)
    absent = rng.random((n_frames, k)) < absent_rate
    conf[absent] = 0
    frames[absent] = 0
    return PoseSequence(header, PoseBody(frames, conf))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def layout75():
    return load_layout("holistic_75")


@pytest.fixture(scope="session")
def layout543():
    return load_layout("holistic_543")


@pytest.fixture
def tiny_component():
    return ComponentSpec("HAND", 3, 2, ((0, 1), (1, 2)))


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
