import math

import numpy as np
import pytest

from helfrich import shapes


@pytest.fixture(scope="session")
def ico4():
    return shapes.icosphere(4)


@pytest.fixture(scope="session")
def ico3():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def torus32():
    return shapes.torus(2.0, 0.5, 32, 32)


@pytest.fixture(scope="session")
def genus2():
    return shapes.double_torus()


@pytest.fixture(scope="session")
def unit_cube():
    return shapes.cube()


@pytest.fixture(scope="session")
def perturbed3():
    return shapes.perturbed_sphere(3, 0.05)


@pytest.fixture(scope="session")
def perturbed4():
    return shapes.perturbed_sphere(4, 0.05)


FOUR_PI = 4 * math.pi


def rel(a, b):
    return abs(a - b) / abs(b)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


ACCEPTANCE_LINES = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store and print the one-line verdict of an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
