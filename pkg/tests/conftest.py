import pytest

from combforge import Grid, Params, one_pulse

DEFAULT = Params(1.0, 2.0, 0.05)
OSC = Params(1.0, 0.95, 0.55)


@pytest.fixture(scope="session")
def default_params():
    return DEFAULT


@pytest.fixture(scope="session")
def osc_params():
    return OSC


@pytest.fixture(scope="session")
def stable_pulse():
    return one_pulse(DEFAULT, Grid(60.0, 512), "stable")


@pytest.fixture(scope="session")
def unstable_pulse():
    return one_pulse(DEFAULT, Grid(60.0, 512), "unstable")


@pytest.fixture(scope="session")
def osc_cell():
    # short period in the oscillatory regime; cheap and diffusively stable
    return one_pulse(OSC, Grid(10.0, 100), "stable")
