import numpy as np
import pytest

from vecparisi.grid import GridFunction


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def smooth(p):
    return np.log(np.cosh(p[:, 0])) + 0.3 * np.sin(p[:, 1]) + 0.1 * p[:, 0] * p[:, 1]


@pytest.mark.parametrize("rot", [None, rotation(0.4)])
def test_interpolation_accuracy(rot):
    g = GridFunction.from_callable(smooth, 2, 121, 0.05, rot)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(200, 2))
    assert np.max(np.abs(g(pts) - smooth(pts))) < 1e-5


def test_derivatives_1d():
    g = GridFunction.from_callable(lambda p: np.log(np.cosh(p[:, 0])), 1, 241, 0.05)
    x = np.linspace(-3, 3, 41)[:, None]
    assert np.allclose(g.grad(x)[:, 0], np.tanh(x[:, 0]), atol=1e-5)
    assert np.allclose(g.hess(x)[:, 0, 0], 1 / np.cosh(x[:, 0]) ** 2, atol=1e-4)
    t = -2 * np.tanh(x[:, 0]) / np.cosh(x[:, 0]) ** 2
    assert np.allclose(g.third(x)[:, 0, 0, 0], t, atol=1e-3)


def test_rotated_hessian_of_quadratic():
    a = np.array([[2.0, 0.6], [0.6, 1.0]])
    g = GridFunction.from_callable(lambda p: 0.5 * np.einsum("ni,ij,nj->n", p, a, p), 2, 81, 0.1, rotation(0.7))
    pts = np.random.default_rng(1).uniform(-2, 2, size=(20, 2))
    assert np.allclose(g.hess(pts), a, atol=1e-8)
    assert np.allclose(g.grad(pts), pts @ a, atol=1e-8)


def test_resample_preserves_function():
    g = GridFunction.from_callable(smooth, 2, 121, 0.05)
    r = g.resample(rotation(0.3))
    pts = np.random.default_rng(2).uniform(-1.5, 1.5, size=(100, 2))
    assert np.max(np.abs(r(pts) - smooth(pts))) < 2e-5


def test_inside_and_linear_extension():
    g = GridFunction.from_callable(lambda p: 2 * p[:, 0] + 1, 1, 21, 0.1)
    assert g.inside(np.array([[0.9]]))[0]
    assert not g.inside(np.array([[1.2]]))[0]
    assert g(np.array([3.0])) == pytest.approx(7.0)


def test_shape_checks():
    with pytest.raises(ValueError):
        GridFunction(np.zeros((3, 4)), 0.1)
    g = GridFunction(np.zeros((5, 5)), 0.1)
    with pytest.raises(ValueError):
        g(np.zeros(3))
