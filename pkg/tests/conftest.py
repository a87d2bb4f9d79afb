import pytest

from escapelab.experiment import fibonacci_center
from escapelab.gdms import INSTANCES, bowen_parameter, get_instance
from escapelab.holes import aperiodic_center
from escapelab.thermo import gibbs_state

INSTANCE_NAMES = sorted(INSTANCES)


def natural_state(name):
    """System with the Gibbs state of its geometric potential at the Bowen parameter."""
    g = get_instance(name)
    b = bowen_parameter(g).value
    return g, b, gibbs_state(g.family().at(b), n_check=0)


def nonperiodic_center(name):
    return fibonacci_center() if name == "golden_thirds" else aperiodic_center()


@pytest.fixture(scope="session")
def states():
    return {name: natural_state(name) for name in INSTANCE_NAMES}


# one line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
