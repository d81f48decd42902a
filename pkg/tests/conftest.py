import math
import warnings

import numpy as np
import pytest

from rotgpe import GridSpec, sample_coherent, sample_vortex
from rotgpe.field import BoundaryDecayWarning

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])


def compact_datum(grid: GridSpec):
    """Off-centre packet plus a vortex: no symmetry, decays well inside l = 8 for all t."""
    u = sample_coherent(grid, (0.8, -0.4), (0.3, 0.6), 1.0) + 0.5 * sample_vortex(grid, 1.0, 1)
    norm = math.sqrt(float(np.sum(np.abs(u.values) ** 2))) * grid.h
    return u.with_values(u.values / norm)


@pytest.fixture
def quiet_decay():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryDecayWarning)
        yield
