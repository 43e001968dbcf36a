import pytest

from firesat.constellation import PUBLISHED_DESIGN, expand
from firesat.coverage import RegionConfig, build_grid, bundled_region


@pytest.fixture(scope="session")
def published():
    return expand(PUBLISHED_DESIGN)


@pytest.fixture(scope="session")
def australia_grid():
    return build_grid(bundled_region())


@pytest.fixture
def square_region():
    ring = [(-30.0, 140.0), (-30.0, 150.0), (-20.0, 150.0), (-20.0, 140.0)]
    return RegionConfig(area_of_interest=ring, spacing_km=100.0, name="square")


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line and fail the test when it does not hold."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def check(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
