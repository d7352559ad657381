import functools

import pytest

from psh_lab import construction

GRID = {"N": 16, "n_theta": 8}


@functools.lru_cache(maxsize=None)
def _D(n, k):
    return construction.search_D(n, k, **GRID)


@functools.lru_cache(maxsize=None)
def _C0(n, k, r):
    return construction.search_C0(r, _D(n, k).D_star / 2, n, k, **GRID)


@pytest.fixture(scope="session")
def d_search():
    """``d_search(n, k)``: cached D search on the standard test grid."""
    return _D


@pytest.fixture(scope="session")
def c0_search():
    """``c0_search(n, k, r)``: cached C0 search at D = D_star / 2."""
    return _C0


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """``acceptance(number, title, ok, detail)``: record one criterion line."""

    def record(number, title, ok, detail=""):
        _ACCEPTANCE.append(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
