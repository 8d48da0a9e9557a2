import json

import numpy as np
import pytest
from conftest import potts_case, random_cdf, sk_case

from vecparisi import pde, symmat
from vecparisi.grid import GridFunction
from vecparisi.paths import DiscreteCdf

BETA = 0.8


@pytest.fixture(scope="module")
def one_step(sk):
    q = 0.4
    return q, pde.solve(sk.base, sk.derived, DiscreteCdf.one_step(q), sk.grid)


def test_terminal_is_log_cosh(one_step):
    _, sol = one_step
    x = np.linspace(-3, 3, 25)[:, None]
    assert np.allclose(sol.value(1.0, x), np.log(np.cosh(x[:, 0])), atol=1e-10)
    assert np.allclose(sol.grad(1.0, x)[:, 0], np.tanh(x[:, 0]), atol=1e-5)


def test_m_one_level_is_log_cosh_plus_variance(one_step):
    q, sol = one_step
    x = np.linspace(-2, 2, 17)[:, None]
    expected = np.log(np.cosh(x[:, 0])) + BETA**2 * (1 - q)
    assert np.allclose(sol.value(q, x), expected, atol=1e-6)


def test_m_zero_level_is_gaussian_mean(one_step):
    q, sol = one_step
    nodes, weights = pde.gauss_hermite(80)
    c = np.sqrt(2 * BETA**2 * q)
    for x in (-1.0, 0.0, 0.5):
        expected = weights @ np.log(np.cosh(x + c * nodes)) + BETA**2 * (1 - q)
        assert sol.value(0.0, [x]) == pytest.approx(expected, abs=1e-6)


def test_quadratic_is_exact_for_m_zero():
    g = GridFunction.from_callable(lambda p: p[:, 0] ** 2, 1, 201, 0.05)
    out = pde.propagate_level(g, np.array([[0.3]]), 0.0)
    x = np.linspace(-3, 3, 13)[:, None]
    assert np.allclose(out(x), x[:, 0] ** 2 + 0.3, atol=1e-10)


def test_zero_covariance_is_identity():
    g = GridFunction.from_callable(lambda p: np.sin(p[:, 0]) + p[:, 1], 2, 41, 0.1)
    assert pde.propagate_level(g, np.zeros((2, 2)), 0.5) is g


def test_rank_deficient_covariance_moves_only_its_range():
    w = np.array([1.0, 1.0]) / np.sqrt(2)
    g = GridFunction.from_callable(lambda p: np.log(np.cosh(p[:, 0] - p[:, 1])), 2, 81, 0.1)
    out = pde.propagate_level(g, 0.5 * np.outer(w, w), 1.0)
    pts = np.random.default_rng(0).uniform(-1.5, 1.5, size=(30, 2))
    # only the rotation to the eigenbasis (an interpolation) touches the values
    assert np.allclose(out(pts), g(pts), atol=1e-4)


def test_propagate_errors():
    g = GridFunction.from_callable(lambda p: p[:, 0], 1, 21, 0.1)
    with pytest.raises(ValueError):
        pde.propagate_level(g, np.array([[0.1]]), 1.5)
    with pytest.raises(symmat.NotPsd):
        pde.propagate_level(g, np.array([[-0.1]]), 0.5)


def test_single_level_alpha(sk):
    alpha = DiscreteCdf((0.0, 1.0), (1.0, 1.0))
    sol = pde.solve(sk.base, sk.derived, alpha, sk.grid)
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(sol.value(0.0, x), np.log(np.cosh(x[:, 0])) + BETA**2, atol=1e-6)


def test_out_of_box_query_raises(sk, alpha3):
    sol = sk.solve(alpha3)
    with pytest.raises(ValueError):
        sol.value(0.0, [1e3])


def test_grid_dimension_limit():
    from vecparisi.paths import DerivedPath, psi_star
    from vecparisi.model import MixtureModel

    derived = DerivedPath(MixtureModel(5, ((2, 1.0),), "potts_hadamard"), psi_star(5))
    with pytest.raises(ValueError):
        pde.GridSpec().resolve(pde.BaseMeasure.potts(5), derived)


def test_gradient_and_hessian_bounds(sk_mix, alpha3):
    sol = sk_mix.solve(alpha3)
    assert pde.gradient_bound_check(sol, (0.0, 0.45, 0.8))["passed"]
    hb = pde.hessian_bounds(sol, (0.0, 0.45, 0.8))
    assert hb["min_eig"] >= -1e-6
    assert hb["max_eig"] <= 1.0 + 1e-6


def test_hessian_psd_potts(potts2_mixed):
    sol = potts2_mixed.solve(DiscreteCdf((0.0, 0.5, 1.0), (0.3, 0.7, 1.0)))
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.5, 1.5, size=(100, 2))
    ev = np.linalg.eigvalsh(sol.hess(0.2, pts))
    assert ev.min() >= -1e-6


def test_potts_symmetry(potts2):
    sol = potts2.solve(DiscreteCdf((0.0, 0.5, 1.0), (0.3, 0.7, 1.0)))
    for t in (-0.7, 0.0, 0.9):
        g = sol.grad(0.0, [t, t])
        assert g[0] == pytest.approx(g[1], abs=1e-8)
    a, b = sol.value(0.0, [0.3, -0.4]), sol.value(0.0, [-0.4, 0.3])
    assert a == pytest.approx(b, abs=1e-8)


def test_lipschitz_in_alpha(sk):
    c = sk.derived.lipschitz_constant()
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, b = random_cdf(rng), random_cdf(rng)
        assert pde.lipschitz_ratio(sk.solve(a), sk.solve(b)) <= c


def test_staircase_is_monotone_and_ends_at_one():
    step = pde.staircase(lambda s: s**2, 8)
    assert step.ms[-1] == 1.0
    assert all(b >= a for a, b in zip(step.ms, step.ms[1:]))
    assert step.ms[3] == pytest.approx((3 / 8) ** 2)


def test_solve_general_sequence_is_cauchy():
    case = sk_case(BETA, pde.GridSpec(h=0.1))
    sols = [pde.solve_general(case.tilted, case.derived, lambda s: s, case.grid, n) for n in (8, 16, 32)]
    gap1 = pde.sup_difference(sols[0], sols[1])
    gap2 = pde.sup_difference(sols[1], sols[2])
    assert gap2 < gap1
    for a, b in zip(sols, sols[1:]):
        bound = a.meta["lipschitz_budget"] + b.meta["lipschitz_budget"]
        assert pde.sup_difference(a, b) <= bound


def test_solve_general_passes_discrete_through(sk, alpha3):
    sol = pde.solve_general(sk.tilted, sk.derived, alpha3, sk.grid)
    assert sol.meta["d_M"] == 0.0
    assert sol.value(0.0, [0.2]) == pytest.approx(sk.solve(alpha3).value(0.0, [0.2]))


def test_residual_vanishes_on_flat_pieces(sk_mix, alpha3):
    sol = sk_mix.solve(alpha3)
    pts = [(s, [x]) for s in (0.1, 0.45, 0.8) for x in (-1.0, 0.0, 0.7)]
    assert pde.mc_residual_check(sol, alpha3, pts, ds=0.02)["max"] < 1e-3


@pytest.mark.parametrize("s,x", [(0.0, [0.0]), (0.35, [1.0]), (0.7, [-0.5])])
def test_exp_v_mean_one(sk_mix, alpha3, s, x):
    r = pde.exp_v_check(sk_mix.solve(alpha3), s, x, n_samples=20000, seed=1)
    assert abs(r["mean"] - 1) <= 3 * r["stderr"]
    assert abs(r["grad_mc"][0] - r["grad_grid"][0]) <= 3 * r["grad_stderr"][0] + 1e-4


def test_joint_convexity_slack(sk_mix):
    rng = np.random.default_rng(4)
    a, b = random_cdf(rng), random_cdf(rng)
    slack = pde.phi_convexity_slack(sk_mix.tilted, sk_mix.derived, a, b, 0.5, 0.2, [0.5], [-1.0], sk_mix.grid)
    assert slack >= -1e-6


def test_exports(tmp_path, sk, alpha3):
    sol = sk.solve(alpha3)
    sol.export_json(tmp_path / "sol.json")
    data = json.loads((tmp_path / "sol.json").read_text())
    assert [lv["q"] for lv in data["levels"]] == list(alpha3.qs)
    sol.export_csv(tmp_path / "sol.csv")
    lines = (tmp_path / "sol.csv").read_text().splitlines()
    assert lines[0] == "level,q,x1,phi"
    assert len(lines) == 1 + len(alpha3.qs) * sol.levels[0].values.size


def test_potts_base_measure():
    b = pde.BaseMeasure.potts(2)
    assert np.allclose(b.hess_phi(np.zeros((1, 2)))[0], [[0.25, -0.25], [-0.25, 0.25]])
    assert b.total_mass == pytest.approx(1.0)
