import numpy as np
import pytest

from crep.graph import DirectedGraph
from crep.model import CrepParams

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def random_graph(N, rng, rate=0.4, recip=0.5):
    """Small Poisson digraph with some extra mutual weight."""
    A = rng.poisson(rate, size=(N, N))
    A = A + (rng.random((N, N)) < recip) * A.T
    np.fill_diagonal(A, 0)
    return DirectedGraph.from_dense(A)


def random_params(N, K, rng, eta=None, normalized=True):
    u = rng.random((N, K)) + 0.05
    v = rng.random((N, K)) + 0.05
    if normalized:
        u /= u.sum(1, keepdims=True)
        v /= v.sum(1, keepdims=True)
    w = rng.random((K, K)) + 0.05
    if eta is None:
        eta = rng.uniform(0.05, 0.9)
    return CrepParams(u, v, w, eta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
