"""Shared fixtures: registries, the switch, and the example processes."""

import numpy as np
import pytest

from causalproc.hilbert import SpaceRegistry
from causalproc.switch import (
    build_example,
    build_quantum_switch,
    switch_decomposition,
)


def pytest_terminal_summary(terminalreporter):
    from helpers import CRITERION_LINES

    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def switch():
    return build_quantum_switch()


@pytest.fixture(scope="session")
def switch_decomp():
    return switch_decomposition()


@pytest.fixture(scope="session")
def examples():
    return {n: build_example(n) for n in (1, 2, 3)}


@pytest.fixture(scope="session")
def reg6():
    """Bipartite six-qubit registry with nontrivial past and future."""
    return SpaceRegistry([(n, 2) for n in ("P", "A_I", "A_O", "B_I", "B_O", "F")])


@pytest.fixture(scope="session")
def roles6():
    return {"P": "P", "A_I": "I1", "A_O": "O1", "B_I": "I2", "B_O": "O2", "F": "F"}


@pytest.fixture(scope="session")
def reg5():
    """Bipartite qubit-slot registry with trivial past and future."""
    return SpaceRegistry([("P", 1), ("A_I", 2), ("A_O", 2),
                          ("B_I", 2), ("B_O", 2), ("F", 1)])


@pytest.fixture(scope="session")
def roles5():
    return {"P": "P", "A_I": "I1", "A_O": "O1", "B_I": "I2", "B_O": "O2", "F": "F"}


