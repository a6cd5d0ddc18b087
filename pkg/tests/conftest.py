import numpy as np
import pytest

from treeslic.grid import Branch, Bus, ConnectedTree, LineParams, RqmLocation
from treeslic.networks import field_chain, replica_118

ACCEPTANCE_KEY = pytest.StashKey[list]()

AB_LINE = LineParams(0.00238, 0.0315, 0.3503)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


@pytest.fixture(scope="session")
def replica():
    return replica_118()


@pytest.fixture(scope="session")
def field_tree():
    return field_chain()


def two_bus(params=AB_LINE, end="from"):
    return ConnectedTree([Bus(1, "p"), Bus(2, "q")], [Branch(1, 2, params)], RqmLocation("1-2", end))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
