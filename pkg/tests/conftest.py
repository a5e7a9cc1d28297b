import sys
from pathlib import Path

import pytest

from spdc_toolbox.configio import load_scenario

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture(scope="session")
def fig1():
    return load_scenario(SCENARIOS / "fig1.scn")


@pytest.fixture(scope="session")
def cat():
    return load_scenario(SCENARIOS / "cat.scn")


@pytest.fixture(scope="session")
def compass():
    return load_scenario(SCENARIOS / "compass.scn")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
