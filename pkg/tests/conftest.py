import numpy as np
import pytest

import gshs


@pytest.fixture(scope="session")
def quad1():
    return gshs.quadratic_potential(1)


@pytest.fixture(scope="session")
def quad2():
    return gshs.quadratic_potential(2)


@pytest.fixture(scope="session")
def lj1():
    return gshs.lennard_jones_potential(1)


@pytest.fixture(scope="session")
def gauss_measure(quad1):
    return gshs.GibbsMeasure(phi1=quad1, phi2=quad1)


@pytest.fixture(scope="session")
def ou_paths(quad1, gauss_measure):
    """Shared stationary unit-eps ensemble, recorded at every step."""
    cfg = gshs.SdeConfig(eps=1.0, t_end=1.0, dt=0.002,
                         scheme="euler-maruyama", n_paths=2000, seed=11,
                         record_stride=1)
    init = gshs.InitialDistribution.stationary(gauss_measure)
    return gshs.simulate_gshs(quad1, quad1, init, cfg)


def rng(seed=0):
    return np.random.default_rng(seed)
