import numpy as np
import pytest

from aggsampling.graphs_io import erdos_renyi, rng_stream, shift_from_graph
from aggsampling.spectral import decompose


def er_system(N, p, seed, kind="adjacency"):
    S = shift_from_graph(erdos_renyi(N, p, seed), kind)
    return S, decompose(S)


@pytest.fixture
def er12():
    return er_system(12, 0.3, 5)


@pytest.fixture
def rng():
    return rng_stream(20240611)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
