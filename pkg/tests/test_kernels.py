import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecparisi import _kernels_py, kernels
from vecparisi.pde import gauss_hermite

try:
    compiled = importlib.import_module("vecparisi._kernels")
except ImportError:  # pragma: no cover - depends on the build
    compiled = None


def interp(values, pos):
    return _kernels_py.interp_matrix(values.size, pos) @ values


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")


@pytest.mark.parametrize("poly", [lambda x: 3.0 + 0 * x, lambda x: 2 * x - 1, lambda x: x * x - 3 * x])
def test_interior_reproduces_quadratics(poly):
    n = 20
    x = np.arange(n, dtype=float)
    pos = np.linspace(1.0, n - 2.0, 97)
    assert np.allclose(interp(poly(x), pos), poly(pos), atol=1e-10)


def test_linear_everywhere_including_outside():
    n = 12
    x = np.arange(n, dtype=float)
    f = 0.5 * x + 2
    pos = np.linspace(-5, n + 4, 200)
    assert np.allclose(interp(f, pos), 0.5 * pos + 2, atol=1e-12)


def test_nodes_are_interpolated():
    rng = np.random.default_rng(0)
    f = rng.normal(size=15)
    assert np.allclose(interp(f, np.arange(15.0)), f, atol=1e-14)


def test_log_mean_exp_branches():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(5, 7))
    w = rng.uniform(size=7)
    w /= w.sum()
    assert np.allclose(_kernels_py.log_mean_exp(v, w, 0.0), v @ w)
    for m in (1e-6, 0.3, 1.0):
        expected = np.log(np.exp(m * v) @ w) / m
        assert np.allclose(_kernels_py.log_mean_exp(v, w, m), expected, atol=1e-10)
    # continuity at m = 0
    assert np.allclose(_kernels_py.log_mean_exp(v, w, 1e-9), v @ w, atol=1e-8)


def test_smooth_lines_gaussian_moment():
    """m = 1 on log cosh: log E cosh(x + c g) = log cosh(x) + c^2 / 2."""
    h, c = 0.02, 0.7
    x = np.arange(-400, 401) * h
    nodes, weights = gauss_hermite(31)
    out = _kernels_py.smooth_lines(np.log(np.cosh(x))[None, :], c * nodes / h, weights, 1.0)[0]
    inner = np.abs(x) < 3
    assert np.allclose(out[inner], np.log(np.cosh(x[inner])) + c * c / 2, atol=1e-6)


@pytest.mark.skipif(compiled is None, reason="compiled kernel not built")
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 1e-4, 0.005, 0.4, 1.0]), st.integers(3, 40))
def test_backends_agree(seed, m, n):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(4, n))
    offsets = rng.normal(scale=3.0, size=9)
    weights = rng.uniform(size=9)
    weights /= weights.sum()
    a = _kernels_py.smooth_lines(f, offsets, weights, m)
    b = compiled.smooth_lines(f, offsets, weights, m)
    assert np.allclose(a, b, atol=1e-12, rtol=1e-12)


@pytest.mark.parametrize("m", [0.5, 1.0])
def test_far_offsets_with_negligible_weights(m):
    """The maximum sits on an extreme node of weight ~1e-15: no cancellation."""
    rng = np.random.default_rng(0)
    f = rng.normal(size=(3, 241))
    nodes, weights = gauss_hermite(21)
    offsets = 0.8 * nodes / 0.05
    pos = np.arange(241)[:, None] + offsets[None, :]
    v = np.einsum("ij,rj->ri", _kernels_py.interp_matrix(241, pos.ravel()).toarray(), f).reshape(3, 241, 21)
    expected = np.log(np.exp(m * v) @ weights) / m
    assert np.allclose(_kernels_py.smooth_lines(f, offsets, weights, m), expected, atol=1e-12)
    if compiled is not None:
        assert np.allclose(compiled.smooth_lines(f, offsets, weights, m), expected, atol=1e-12)


@pytest.mark.skipif(compiled is None, reason="compiled kernel not built")
@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1e-3, 0.05, 0.7]), st.floats(1.0, 200.0))
def test_backends_agree_far_outside(seed, m, spread):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(2, 31))
    nodes, weights = gauss_hermite(21)
    a = _kernels_py.smooth_lines(f, spread * nodes, weights, m)
    b = compiled.smooth_lines(f, spread * nodes, weights, m)
    assert np.allclose(a, b, atol=1e-10, rtol=1e-12)
