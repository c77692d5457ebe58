import numpy as np
import pytest

from varexp import Mesh, build_field, interpolate, zero_boundary

ACCEPTANCE = []


@pytest.fixture
def unit_interval():
    return Mesh.interval(0.0, 1.0, 64)


@pytest.fixture
def unit_square():
    return Mesh.rectangle(0.0, 1.0, 0.0, 1.0, 12)


def sine(mesh, modes=1):
    def f(*x):
        out = 1.0
        for xi, (lo, hi) in zip(x, mesh.extent):
            out = out * np.sin(modes * np.pi * (xi - lo) / (hi - lo))
        return out

    # sin(k pi) is only zero up to rounding
    return zero_boundary(interpolate(f, mesh))


def const(mesh, c):
    return build_field(mesh, {"family": "constant", "c": c})


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""

    def _record(number, passed, detail):
        ACCEPTANCE.append((number, bool(passed), detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}")
