import pytest

from torcanard import FlowConfig, ReleaseMap, fixture_family, predict

# centre of the window with 42 phase turns, found by Newton on the phase gap
# and confirmed with an independent integrator in test_canard_hunter
WINDOW_EPS = 0.10051150775529305


@pytest.fixture(scope="session")
def family():
    return fixture_family(1)


@pytest.fixture(scope="session")
def rmap(family):
    return ReleaseMap(family.lam_minus, family.lam_plus, family.sections)


@pytest.fixture(scope="session")
def prediction(family, rmap):
    return predict(rmap, family.ladder)


@pytest.fixture(scope="session")
def window_setup(family):
    from torcanard.poincare import ShootingSetup
    return ShootingSetup(family, FlowConfig(WINDOW_EPS), window_tau=0.0)
