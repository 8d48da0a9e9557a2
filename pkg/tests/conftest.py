import numpy as np
import pytest

from vecparisi.functional import tilt
from vecparisi.model import MixtureModel
from vecparisi.paths import DerivedPath, DiscreteCdf, MatrixPath, psi_star
from vecparisi.pde import BaseMeasure, GridSpec, solve


class Case:
    """Model, path, base measure, and the tilted measure and derived path built from them."""

    def __init__(self, model, psi, base, grid=None):
        self.model = model
        self.psi = psi
        self.base = base
        self.grid = grid or GridSpec()
        self.derived = DerivedPath(model, psi)
        self.tilted = tilt(base, model, psi.z)

    def solve(self, alpha, grid=None):
        return solve(self.tilted, self.derived, alpha, grid or self.grid)


def sk_case(beta=0.8, grid=None):
    model = MixtureModel(1, ((2, beta),), "scalar_mixed")
    psi = MatrixPath.linear(np.zeros((1, 1)), np.ones((1, 1)))
    return Case(model, psi, BaseMeasure.ising(), grid)


def sk_mixture_case(grid=None):
    model = MixtureModel(1, ((2, 0.7), (3, 0.5)), "scalar_mixed")
    psi = MatrixPath.linear(np.zeros((1, 1)), np.ones((1, 1)))
    return Case(model, psi, BaseMeasure.ising(), grid)


def potts_case(dim=2, betas=((2, 1.0),), h=0.1):
    model = MixtureModel(dim, betas, "potts_hadamard")
    return Case(model, psi_star(dim), BaseMeasure.potts(dim), GridSpec(h=h))


def random_cdf(rng, k=3):
    qs = (0.0,) + tuple(np.sort(rng.uniform(0.05, 0.95, size=k - 1))) + (1.0,)
    ms = tuple(np.sort(rng.uniform(0.0, 1.0, size=k))) + (1.0,)
    return DiscreteCdf(qs, ms)


@pytest.fixture(scope="session")
def sk():
    return sk_case()


@pytest.fixture(scope="session")
def sk_mix():
    return sk_mixture_case()


@pytest.fixture(scope="session")
def potts2():
    return potts_case(2, ((2, 1.0),))


@pytest.fixture(scope="session")
def potts2_mixed():
    return potts_case(2, ((2, 1.0), (3, 1.0)))


@pytest.fixture(scope="session")
def alpha3():
    return DiscreteCdf((0.0, 0.3, 0.6, 1.0), (0.2, 0.5, 0.8, 1.0))


# One line per acceptance criterion, filled in by tests/test_acceptance.py.
ACCEPTANCE = {}


def record(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
