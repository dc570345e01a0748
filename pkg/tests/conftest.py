import math

import numpy as np
import pytest

from bandchain import build_homogeneous_rw, stationary_prefix, sweep

# E1: birth-death walk with q = 0.75 down, p = 0.25 up; reversible, tau = 1/3.
E1_INCREMENTS = {-1: 0.75, 1: 0.25}
# E2: skip-free to the left, jumps up by one or two.
E2_INCREMENTS = {-1: 0.7, 1: 0.2, 2: 0.1}

E1_TAU = 1.0 / 3.0
E1_ALPHA0 = 2.0 * math.sqrt(0.25 * 0.75)
# psi(t) = 1 reduces to 0.7 t^2 - 0.3 t - 0.1 = 0 after dividing out (t - 1)
E2_TAU = (0.3 + math.sqrt(0.37)) / 1.4
E2_ALPHA0 = 0.7 * math.sqrt(E2_TAU) + 0.2 / math.sqrt(E2_TAU) + 0.1 / E2_TAU


def make_e1():
    return build_homogeneous_rw(1, 1, E1_INCREMENTS, [[0.75, 0.25]], name="E1")


def make_e2():
    return build_homogeneous_rw(1, 2, E2_INCREMENTS, [[0.7, 0.2, 0.1]], name="E2")


@pytest.fixture(scope="session")
def e1():
    return make_e1()


@pytest.fixture(scope="session")
def e2():
    return make_e2()


@pytest.fixture(scope="session")
def e1_pi(e1):
    return stationary_prefix(e1, 260)


@pytest.fixture(scope="session")
def e2_pi(e2):
    return stationary_prefix(e2, 400)


@pytest.fixture(scope="session")
def e1_sweep(e1):
    return sweep(e1, [25, 50, 100, 200])


def random_stochastic(rng, n, density=0.7):
    A = rng.random((n, n)) * (rng.random((n, n)) < density)
    A[np.arange(n), rng.integers(0, n, n)] += 0.1
    return A / A.sum(axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.verdict_lines():
        terminalreporter.write_line(line)
