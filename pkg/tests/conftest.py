import numpy as np
import pytest

from bundle_covering.dynamics import builtin
from bundle_covering.geometry import DomainSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cap_domain() -> DomainSpec:
    return DomainSpec.from_radii("1", "1.2")


@pytest.fixture
def unit_domain() -> DomainSpec:
    return DomainSpec.from_radii("1", "1")


@pytest.fixture
def toy_homotopy():
    return builtin("toy_homotopy", {"mu": "1/10"})


@pytest.fixture
def broken_cap():
    # x-term -16/5·x: the x = 1 face lands on [0.2, 1.4], across the domain edge
    return builtin("cap_homotopy", {"linear_coeff": "16/5"})
