import math

import numpy as np
import pytest

from nldiff import KernelSpec, build_geometry, build_kernel


def bump(center=0.0, halfwidth=0.5, amplitude=1.0):
    """Smooth compactly supported ``cos^2`` profile."""
    def f(x):
        r = (x - center) / halfwidth
        return np.where(np.abs(r) < 1, amplitude * np.cos(0.5 * math.pi * r) ** 2, 0.0)
    return f


def setup(spec, omega=(-1.0, 1.0), h=0.01):
    k = build_kernel(spec, h)
    return k, build_geometry(omega, k)


GAUSS = KernelSpec.gaussian(math.sqrt(0.5))
BOX = KernelSpec.box(-1.0, 1.0)


@pytest.fixture
def box_setup():
    return setup(BOX)


@pytest.fixture
def gauss_setup():
    return setup(GAUSS)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def report():
    """Record one acceptance line; printed again in the terminal summary."""
    def emit(label, ok, detail=""):
        line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
