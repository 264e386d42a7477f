import math

import numpy as np
import pytest

from finslergbc.connection import cartan_connection, to_orthonormal_frame
from finslergbc.manifolds import install_metric, sphere_atlas, torus_atlas
from finslergbc.quadrature import ChartPoints


@pytest.fixture(scope="session")
def sphere():
    return sphere_atlas()


@pytest.fixture(scope="session")
def torus():
    return torus_atlas()


@pytest.fixture(scope="session")
def round_metric(sphere):
    return install_metric(sphere, "round_sphere")


@pytest.fixture(scope="session")
def randers_metric(sphere):
    return install_metric(sphere, "randers", {"eps": 0.1})


@pytest.fixture(scope="session")
def flat_metric(torus):
    return install_metric(torus, "euclidean")


@pytest.fixture(scope="session")
def quartic_metric(torus):
    return install_metric(torus, "quartic", {"eps": 0.05})


@pytest.fixture(scope="session")
def cartan_frame_round(round_metric):
    return to_orthonormal_frame(cartan_connection(), round_metric)


@pytest.fixture(scope="session")
def cartan_frame_randers(randers_metric):
    return to_orthonormal_frame(cartan_connection(), randers_metric)


def bundle_points(chart: str, count: int, seed: int = 0, rmax: float = 0.9):
    """Random sphere-bundle chart points inside the integration region."""
    rng = np.random.default_rng(seed)
    if chart == "torus":
        x1 = rng.uniform(0.0, 2.0 * math.pi, count)
        x2 = rng.uniform(0.0, 2.0 * math.pi, count)
    else:
        r = np.sqrt(rng.uniform(0.0, rmax ** 2, count))
        ph = rng.uniform(0.0, 2.0 * math.pi, count)
        x1, x2 = r * np.cos(ph), r * np.sin(ph)
    th = rng.uniform(0.0, 2.0 * math.pi, count)
    return ChartPoints.of(chart, x1, x2, th)
