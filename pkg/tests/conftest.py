import pytest

from helpers import ACCEPTANCE_LINES, open_road
from pdmlab.demo_scenes import make_scene


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def road():
    return open_road()


@pytest.fixture(scope="session")
def straight_demo():
    return make_scene("straight", 0)

