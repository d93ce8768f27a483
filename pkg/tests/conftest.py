import numpy as np
import pytest

from cahc.core import Hypergraph


def random_hypergraph(rng, n=12, m=6, d=5, k=3, min_size=2, max_size=4):
    """Random hypergraph in which every node sits in at least one edge."""
    inc = np.zeros((n, m), dtype=np.int8)
    for j in range(m):
        size = rng.integers(min_size, max_size + 1)
        inc[rng.choice(n, size=size, replace=False), j] = 1
    for i in range(n):
        if inc[i].sum() == 0:
            inc[i, rng.integers(m)] = 1
    return Hypergraph(inc, rng.normal(size=(n, d)), rng.integers(0, k, n), k)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_graph(rng):
    return random_hypergraph(rng)


# (criterion, status, detail); status is True/False or a label such as "SKIP"
_ACCEPTANCE: list[tuple[str, bool | str, str]] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _ACCEPTANCE:
        label = status if isinstance(status, str) else ("PASS" if status else "FAIL")
        terminalreporter.write_line(f"{label}  {name}  {detail}")
