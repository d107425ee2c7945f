import pytest

from sturmlab.cf import Frequency
from sturmlab.spectrum import BandTree

GOLDEN = Frequency.periodic((1,))
SILVER = Frequency.periodic((2,))
MIXED = Frequency.periodic((1, 2))
TEST_FREQS = {"golden": GOLDEN, "silver": SILVER, "mixed": MIXED}


@pytest.fixture(scope="session")
def golden():
    return GOLDEN


@pytest.fixture(scope="session")
def trees():
    """Depth-8 trees at coupling 24 for the three test frequencies."""
    return {k: BandTree(f, 24, 8).expand() for k, f in TEST_FREQS.items()}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical runs")


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    def record(k, passed, detail):
        ACCEPTANCE[k] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
