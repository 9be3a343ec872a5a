import numpy as np
import pytest

from cpgdist.model import jc_cpg_params


def dependent_se(indicator, max_lag=2):
    """Standard error of the mean of a stationary circular series that is
    ``max_lag``-dependent (autocovariances beyond ``max_lag`` are zero)."""
    x = np.asarray(indicator, dtype=float)
    x = x - x.mean()
    var = float(np.mean(x * x))
    for lag in range(1, max_lag + 1):
        var += 2 * float(np.mean(x * np.roll(x, -lag)))
    return np.sqrt(max(var, 0.0) / x.size)


@pytest.fixture(scope="session")
def jc10():
    return jc_cpg_params(10.0)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, passed, detail):
        line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
