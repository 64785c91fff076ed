import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qpm.hamiltonian import heisenberg_ring  # noqa: E402
from qpm.refstates import heisenberg_references  # noqa: E402
from qpm.trotter import suzuki_coefficients  # noqa: E402


@pytest.fixture(scope="session")
def ring6():
    return heisenberg_ring(6)


@pytest.fixture(scope="session")
def ring8():
    return heisenberg_ring(8)


@pytest.fixture(scope="session")
def refs8():
    return heisenberg_references(8)


@pytest.fixture(scope="session")
def s2():
    return suzuki_coefficients(1, 3, 2)


@pytest.fixture(scope="session")
def s4():
    return suzuki_coefficients(2, 3, 2)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acceptance_log.RESULTS):
        terminalreporter.write_line(acceptance_log.line(k))
