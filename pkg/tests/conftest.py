"""Session-wide tables so each expensive enumeration or MC run happens once."""
import pytest

from pulledsaw.enumeration import enumerate_walks, plane_from_full
from pulledsaw.flatperm import hybrid_table, run_flatperm
from pulledsaw.thermo import FreeEnergyLimits

ACCEPTANCE_LINES: list[str] = []

MC2_TOURS = 10**6
MC2_SEED = 20240611
MC3_TOURS = 200_000
MC3_NMAX = 24
MC3_SEED = 7


@pytest.fixture(scope="session")
def d2_positive():
    return enumerate_walks(2, 20, "positive", workers=1, symmetric=True)


@pytest.fixture(scope="session")
def d2_full():
    return enumerate_walks(2, 20, "full-lattice", workers=1, symmetric=True)


@pytest.fixture(scope="session")
def d2_unfolded():
    return enumerate_walks(2, 20, "positive-unfolded", workers=1)


@pytest.fixture(scope="session")
def d1_plane():
    return enumerate_walks(1, 20, "plane", workers=1)


@pytest.fixture(scope="session")
def d2_limits(d2_positive, d2_full, d1_plane):
    return FreeEnergyLimits(d2_positive, d2_full, d1_plane)


@pytest.fixture(scope="session")
def d3_positive():
    return enumerate_walks(3, 12, "positive", workers=1, symmetric=True)


@pytest.fixture(scope="session")
def d3_full():
    return enumerate_walks(3, 12, "full-lattice", workers=1, symmetric=True)


@pytest.fixture(scope="session")
def d3_unfolded():
    return enumerate_walks(3, 12, "positive-unfolded", workers=1)


@pytest.fixture(scope="session")
def d3_mc():
    return run_flatperm(3, MC3_NMAX, MC3_TOURS, MC3_SEED, workers=1)


@pytest.fixture(scope="session")
def d3_limits(d3_positive, d3_full, d3_mc, d2_full):
    return FreeEnergyLimits(hybrid_table(d3_positive, d3_mc), d3_full, plane_from_full(d2_full))


@pytest.fixture(scope="session")
def d2_mc_runs():
    """The same 10^6-tour run executed with one and with eight workers."""
    return {w: run_flatperm(2, 10, MC2_TOURS, MC2_SEED, workers=w) for w in (1, 8)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
