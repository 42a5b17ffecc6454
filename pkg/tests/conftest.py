import pytest

from readout_opt.scenario import Camera, load_scenario


@pytest.fixture(scope="session")
def shallow():
    return load_scenario("shallow_trap")


@pytest.fixture(scope="session")
def shallow_camera(shallow):
    return shallow.replace(detector=Camera())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
