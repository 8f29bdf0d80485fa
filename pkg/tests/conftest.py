import pytest

from zenotunnel.core import LatticeParams


@pytest.fixture(scope="session")
def p91():
    return LatticeParams(depth_freq=91e3)


@pytest.fixture(scope="session")
def p116():
    return LatticeParams(depth_freq=116e3)
