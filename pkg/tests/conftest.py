"""Shared fixtures and hypothesis strategies."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from starrobust.geometry import EuclideanBall, Hyperrectangle, Interval, SparseCone, Simplex, Singleton, StarCross

settings.register_profile("starrobust", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("starrobust")


def catalog_sets():
    """One representative of every set family, bounded ones first."""
    return [
        Singleton([0.3, -0.2]),
        Interval(0.0, 1.0),
        EuclideanBall([0.0, 0.0], 1.0),
        Hyperrectangle([0.0, 0.0], [1.0, 1.0]),
        StarCross([0.0, 0.0], 1.0),
        Simplex(2),
        SparseCone(3, 1),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def points_2d(draw, min_size=1, max_size=30, bound=3.0):
    """A small (m, 2) array of finite points."""
    m = draw(st.integers(min_size, max_size))
    coords = draw(st.lists(st.floats(-bound, bound, allow_nan=False, allow_infinity=False),
                           min_size=2 * m, max_size=2 * m))
    return np.array(coords, float).reshape(m, 2)


@st.composite
def bounded_sets(draw):
    """A bounded two-dimensional catalog set with random placement."""
    kind = draw(st.sampled_from(["ball", "box", "cross", "simplex"]))
    cx = draw(st.floats(-2, 2))
    cy = draw(st.floats(-2, 2))
    size = draw(st.floats(0.2, 1.5))
    if kind == "ball":
        return EuclideanBall([cx, cy], size)
    if kind == "box":
        return Hyperrectangle([cx, cy], [cx + size, cy + 0.7 * size])
    if kind == "cross":
        return StarCross([cx, cy], [size, 0.5 * size])
    return Simplex(2)


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
