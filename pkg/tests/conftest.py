import numpy as np
import pytest

from semimvs import synth
from semimvs.geometry import Extrinsics, Intrinsics, View


def rotation(rng, max_angle=0.3):
    """Random rotation of at most ``max_angle`` radians (Rodrigues)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    a = rng.uniform(-max_angle, max_angle)
    Kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(a) * Kx + (1 - np.cos(a)) * Kx @ Kx


def random_view(rng, H=32, W=40, channels=3, view_id=0, max_angle=0.3, max_shift=0.5):
    intr = Intrinsics(rng.uniform(40, 80), rng.uniform(40, 80), (W - 1) / 2 + rng.uniform(-2, 2), (H - 1) / 2 + rng.uniform(-2, 2))
    ext = Extrinsics(rotation(rng, max_angle), rng.uniform(-max_shift, max_shift, 3))
    return View(rng.random((H, W, channels)), intr, ext, view_id)


@pytest.fixture(scope="session")
def plane_scene():
    return synth.generate("plane", n_views=5, texture="noise", resolution=(128, 128), seed=0)


@pytest.fixture(scope="session")
def small_scene():
    return synth.generate("plane", n_views=3, texture="noise", resolution=(48, 48), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
