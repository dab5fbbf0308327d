import numpy as np
import pytest

from finslerlab.zoo import build


@pytest.fixture(scope="session")
def euclid3():
    return build("euclidean", 3)


@pytest.fixture(scope="session")
def euclid2():
    return build("euclidean", 2)


@pytest.fixture(scope="session")
def riem2():
    return build("riemannian", 2, {"a_diag": [1.0, 4.0]})


@pytest.fixture(scope="session")
def riem3():
    return build("riemannian", 3, {"a_diag": [1.0, 4.0, 1.0]})


@pytest.fixture(scope="session")
def quartic3():
    return build("minkowski_quartic", 3)


@pytest.fixture(scope="session")
def randers3():
    return build("randers", 3)


@pytest.fixture(scope="session")
def funk3():
    return build("funk_ball", 3)


@pytest.fixture(scope="session")
def zoo_models(euclid3, riem3, quartic3, randers3, funk3):
    return [euclid3, riem3, quartic3, randers3, funk3]


def random_flag(model, rng):
    """A random admissible flag point for the model."""
    from finslerlab.core import FlagPoint

    return FlagPoint(model.sample_x(rng), model.sample_y(rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
