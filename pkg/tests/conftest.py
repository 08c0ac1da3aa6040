from fractions import Fraction

import numpy as np
import pytest

from attnlab import _backend

_ACCEPTANCE = []


@pytest.fixture(params=sorted(_backend.available()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _backend.available()[request.param])
    return request.param


@pytest.fixture
def record():
    def _record(criterion, ok, detail=""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}  {detail}")


# exp(z) = [[1, 3], [2, 2]]: every normalization of this kernel is rational
KERNEL = [[Fraction(1), Fraction(3)], [Fraction(2), Fraction(2)]]


def frac_row_normalize(m):
    return [[v / sum(row) for v in row] for row in m]


def frac_col_normalize(m):
    cols = [sum(r[j] for r in m) for j in range(len(m[0]))]
    return [[v / cols[j] for j, v in enumerate(row)] for row in m]


def to_float(m):
    return np.array([[float(v) for v in row] for row in m])


@pytest.fixture
def z_rational():
    return np.log(to_float(KERNEL))
