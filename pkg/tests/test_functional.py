import numpy as np
import pytest
from conftest import random_cdf

from vecparisi import functional
from vecparisi.config import RunConfig
from vecparisi.model import theta
from vecparisi.paths import DerivedPath, DiscreteCdf, StepPath, compose_pi
from vecparisi.verify import sk_closed_form


def cfg(preset, **over):
    return RunConfig.from_dict({"preset": preset, **over})


@pytest.mark.parametrize("beta,q", [(0.3, 0.5), (0.8, 0.25)])
def test_sk_closed_form(beta, q):
    c = cfg("sk-rs", model={"dim": 1, "betas": [[2, beta]]})
    val = functional.evaluate(c.model, c.psi, DiscreteCdf.one_step(q), c.base, c.grid)
    assert val.total == pytest.approx(sk_closed_form(beta, q), abs=1e-4)


def test_constant_path_has_no_correction():
    c = cfg("constant-psi")
    val = functional.evaluate(c.model, c.psi, c.alpha, c.base, c.grid)
    assert val.term_int == pytest.approx(0.0, abs=1e-14)
    tilted = functional.tilt(c.base, c.model, c.psi.z)
    # Phi never moves, and mu(0) = 2 beta^2 sets the Gaussian start point
    x, w = functional.gauss_hermite(c.grid.quad_nodes)
    expected = w @ tilted.phi(np.sqrt(2 * 0.8**2) * x[:, None])
    assert val.term_phi == pytest.approx(expected, abs=1e-6)
    assert val.term_theta == pytest.approx(0.5 * theta(c.model, c.psi.z))


@pytest.mark.parametrize("preset", ["sk-mixture", "potts2-mixed"])
def test_integral_closed_form_matches_quadrature(preset):
    c = cfg(preset)
    derived = DerivedPath(c.model, c.psi)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = random_cdf(rng)
        direct = functional.integral_direct(derived, a)
        assert direct == pytest.approx(functional.integral_closed_form(c.model, c.psi, a), abs=1e-8)


def test_evaluate_pi_matches_evaluate():
    c = cfg("sk-mixture", grid={"h": 0.1})
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = random_cdf(rng)
        direct = functional.evaluate(c.model, c.psi, a, c.base, c.grid).total
        via_pi = functional.evaluate_pi(c.model, compose_pi(c.psi, a), c.base, c.grid)
        assert via_pi == pytest.approx(direct, abs=1e-8)


def test_ising_tilt_is_a_constant_factor():
    c = cfg("sk-rs")
    t = functional.tilt(c.base, c.model, c.psi.z)
    assert np.allclose(t.weights, 0.5 * np.exp(-(0.8**2)))


def test_potts_tilt_is_symmetric():
    c = cfg("potts3-beta2")
    t = functional.tilt(c.base, c.model, c.psi.z)
    assert np.allclose(t.weights, t.weights[0])
    assert t.total_mass < 1.0


def test_mismatched_integral_raises(monkeypatch):
    c = cfg("sk-rs")
    monkeypatch.setattr(functional, "integral_direct", lambda derived, alpha: 123.0)
    with pytest.raises(ArithmeticError):
        functional.evaluate(c.model, c.psi, c.alpha, c.base, c.grid)


def test_decompose_pi_rejects_decreasing_values():
    c = cfg("sk-rs")
    pi = compose_pi(c.psi, c.alpha)
    with pytest.raises(ValueError):
        functional.decompose_pi(StepPath(pi.edges, pi.values[::-1]))
