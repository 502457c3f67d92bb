import pytest

from slln import fixtures
from slln.measures import bernoulli, make_ambiguity_set, make_finite_distribution
from slln.sequences import make_iid_model


@pytest.fixture
def two_bernoulli():
    return fixtures.two_bernoulli()


@pytest.fixture
def moving_average():
    return fixtures.moving_average()


@pytest.fixture
def singleton():
    return fixtures.classical_singleton()


@pytest.fixture
def three_point():
    """i.i.d. over two laws on {-1, 0, 2}."""
    return make_iid_model(make_ambiguity_set([
        make_finite_distribution([-1, 0, 2], [0.2, 0.5, 0.3]),
        make_finite_distribution([-1, 0, 2], [0.6, 0.1, 0.3]),
    ]))


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "out")


def bern_model(*ps):
    return make_iid_model(make_ambiguity_set([bernoulli(p) for p in ps]))
