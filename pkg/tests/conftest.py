import os
import sys

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(os.path.dirname(HERE), "fixtures")

sys.path.insert(0, HERE)

from etalebench.groupoid import ObjectGraph, action_groupoid, point_groupoid, trivial_groupoid  # noqa: E402
from etalebench.groups import cyclic  # noqa: E402
from etalebench.specfile import Loader  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture(scope="session")
def loader():
    return Loader()


@pytest.fixture(scope="session")
def A():
    """Z/2 acting on the path -1 - 0 - 1 by negation."""
    return action_groupoid(cyclic(2), ObjectGraph([-1, 0, 1], [(-1, 0), (0, 1)]),
                           lambda g, x: -x if g else x, name="A")


@pytest.fixture(scope="session")
def PT():
    return point_groupoid()


@pytest.fixture(scope="session")
def C4():
    return trivial_groupoid(ObjectGraph(range(4), [(0, 1), (1, 2), (2, 3), (3, 0)]), name="C4")


@pytest.fixture(scope="session")
def Z3cycle():
    return action_groupoid(cyclic(3), ObjectGraph(range(3), [(0, 1), (1, 2), (2, 0)]),
                           lambda g, x: (g + x) % 3, name="Z3cycle")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
