"""Shared models and helpers for the test suite."""
import numpy as np
import pytest

from mjspectra.models import JacobiMetric, KatokRanders, Liouville, Mechanical, WaterWave
from mjspectra.trig import Field2D, TrigSeries


def liouville(u=(1.0,), v=(0.0,)) -> Liouville:
    return Liouville(TrigSeries(tuple(u)), TrigSeries(tuple(v)))


@pytest.fixture
def flat():
    return liouville()


@pytest.fixture
def perturbed():
    """``u = 1 + 0.3 cos x1``, ``v = 0.2 cos x2``: even in both angles, min(u + v) = 0.5."""
    return liouville((1.0, 0.3), (0.0, 0.2))


@pytest.fixture
def mechanical():
    return Mechanical(V=Field2D(TrigSeries((0.0, 0.3)), TrigSeries((0.0, 0.2))))


@pytest.fixture
def jacobi(mechanical):
    return JacobiMetric(mechanical, 1.0)


@pytest.fixture
def waterwave():
    return WaterWave(Field2D(TrigSeries((0.9, 0.2)), TrigSeries((0.0, 0.1))),
                     Field2D(TrigSeries((0.05,)), TrigSeries((0.0,))))


@pytest.fixture
def katok():
    return KatokRanders(0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_gradient(model, y, step=1e-6):
    """Central finite differences of the symbol in the four state coordinates."""
    g = np.empty(4)
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        g[i] = (model.energy(y + e) - model.energy(y - e)) / (2 * step)
    return g[:2], g[2:]
