import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from deformed_transport.deformed_group import deformation_for
from deformed_transport.manifolds import catalog_manifold

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CATALOG = ["euclidean-3", "sphere2", "hyperbolic2", "polar2"]


@pytest.fixture(scope="session")
def sphere():
    return catalog_manifold("sphere2")


@pytest.fixture(scope="session")
def sphere_def(sphere):
    return deformation_for(sphere)


@pytest.fixture(scope="session")
def flat2():
    return catalog_manifold("euclidean-2")


@pytest.fixture(scope="session")
def flat2_def(flat2):
    return deformation_for(flat2)


def sphere_christoffel(theta):
    """Closed-form nonzero symbols on the unit sphere in (theta, phi)."""
    return {(0, 1, 1): -math.sin(theta) * math.cos(theta), (1, 0, 1): 1 / math.tan(theta), (1, 1, 0): 1 / math.tan(theta)}


def log_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
