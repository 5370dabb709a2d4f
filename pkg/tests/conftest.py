import pytest
from hypothesis import HealthCheck, settings

from floodharden.formulations import RecourseSolution
from support import ACCEPTANCE, CONSERVATION, TOL, desk, desk_oracle

settings.register_profile("repo", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("repo")

_original_post_init = RecourseSolution.__post_init__


def _recording_post_init(self):
    _original_post_init(self)
    CONSERVATION.record(self)


RecourseSolution.__post_init__ = _recording_post_init


@pytest.fixture(autouse=True)
def conservation_guard():
    """Every recourse solution built during a test must balance generation and load."""
    CONSERVATION.pending.clear()
    yield
    bad = [(k, v) for k, v in CONSERVATION.pending if v > TOL]
    CONSERVATION.pending.clear()
    assert not bad, f"generation/load imbalance above {TOL}: {bad[:5]}"


@pytest.fixture(scope="session")
def desk_grid():
    return desk()[0]


@pytest.fixture(scope="session")
def desk_scenarios():
    return desk()[1]


@pytest.fixture(scope="session")
def oracle():
    return desk_oracle()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    terminalreporter.write_line(
        f"recourse solutions checked for conservation: {CONSERVATION.checked}, "
        f"worst imbalance {CONSERVATION.worst:.2e}")
