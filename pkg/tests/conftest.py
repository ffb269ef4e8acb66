import pytest

from oracle import exhaustive_table
from phinet.tuner import ALPHAS, BLOCKS, RESOLUTIONS, T_ZERO_RANGE

ORACLE_BETAS = (0.25, 0.5, 1.0, 1.5, 2.0)


@pytest.fixture(scope="session")
def oracle_grid():
    """Exact resources over the tuner's grid, t0 in 2..8 and five beta levels."""
    lo, hi = T_ZERO_RANGE
    return exhaustive_table(RESOLUTIONS, ALPHAS, BLOCKS, range(lo, hi + 1), ORACLE_BETAS)


_ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record a one-line verdict for an acceptance criterion."""
    key = request.node.name

    def record(passed, detail):
        _ACCEPTANCE[key] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")
