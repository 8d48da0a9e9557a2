"""The Parisi functional of a path ``Psi`` and an order parameter ``alpha``:

    F(Psi, alpha) = E Phi(0, sqrt(mu(0)) eta) + theta(z)/2 - 1/2 int alpha Psi . gamma ds

where ``Phi`` solves the PDE with the tilted terminal measure.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import symmat
from .model import grad_xi, theta
from .paths import DerivedPath, DiscreteCdf, MatrixPath
from .pde import GridSpec, gauss_hermite, solve

TERM_INT_TOL = 1e-8


@dataclass(frozen=True)
class FunctionalValue:
    total: float
    term_phi: float
    term_theta: float
    term_int: float
    term_int_direct: float = float("nan")

    def to_dict(self):
        return asdict(self)


def tilt(base, model, z):
    """Reweight each atom by ``exp(-1/2 grad_xi(z) . sigma sigma^T)``; no renormalization."""
    g = grad_xi(model, z)
    factors = np.exp(-0.5 * np.einsum("ai,ij,aj->a", base.points, g, base.points))
    return base.reweighted(factors)


def integral_closed_form(model, psi, alpha):
    """``int alpha Psi . gamma = theta(z) - sum_l (m_l - m_{l-1}) theta(Psi(q_l))``."""
    total = theta(model, psi.z)
    for q, mass in alpha.mass():
        total -= mass * theta(model, psi.value(q))
    return total


def integral_direct(derived, alpha, order=12):
    """Gauss-Legendre quadrature of ``alpha(s) Psi(s) . gamma(s)`` on each piece
    where ``alpha`` is constant and ``Psi`` is linear."""
    psi = derived.psi
    pts = sorted(set(alpha.qs) | set(psi.breakpoints()))
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        if b <= a:
            continue
        m = alpha.evaluate(a)
        if m == 0.0:
            continue
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        for t, w in zip(nodes, weights):
            s = mid + half * t
            # the piece is [a, b); evaluate the right derivative inside it
            total += m * w * half * symmat.dot(psi.value(s), derived.gamma(s))
    return total


def expected_phi0(sol, quad_nodes=21):
    """``E Phi(0, sqrt(mu(0)) eta)`` by a tensor Gauss-Hermite rule in the
    eigenbasis of ``mu(0)``; exactly ``Phi(0, 0)`` when ``mu(0) == 0``."""
    mu0 = sol.derived.mu(0.0)
    f = symmat.psd_factor(mu0, tol=1e-10)
    gf = sol.at(0.0)
    d = sol.dim
    if f.shape[1] == 0:
        return float(gf(np.zeros(d)))
    x, w = gauss_hermite(quad_nodes)
    r = f.shape[1]
    mesh = np.meshgrid(*([x] * r), indexing="ij")
    eta = np.stack([g.ravel() for g in mesh], axis=1)
    wts = np.ones(1)
    for _ in range(r):
        wts = np.outer(wts, w).ravel()
    return float(wts @ gf(eta @ f.T))


def evaluate(model, psi, alpha, base, grid=None, check_terms=True):
    """Three-term value of the functional for a step ``alpha``."""
    grid = grid or GridSpec()
    derived = DerivedPath(model, psi)
    tilted = tilt(base, model, psi.z)
    sol = solve(tilted, derived, alpha, grid)
    term_phi = expected_phi0(sol, grid.quad_nodes)
    term_theta = 0.5 * theta(model, psi.z)
    closed = integral_closed_form(model, psi, alpha)
    direct = integral_direct(derived, alpha) if check_terms else float("nan")
    if check_terms and abs(direct - closed) > TERM_INT_TOL * max(1.0, abs(closed)):
        raise ArithmeticError(
            f"correction integral mismatch: direct {direct!r} vs closed form {closed!r}"
        )
    term_int = -0.5 * closed
    return FunctionalValue(term_phi + term_theta + term_int, term_phi, term_theta, term_int, -0.5 * direct)


def decompose_pi(pi):
    """Split a step path into a piecewise-linear ``Psi`` through its values at
    ``q_l = l/K`` and the step CDF with those ``q_l`` and the path's edges."""
    values = list(pi.values)
    k = len(values) - 1
    if k == 0:
        raise ValueError("step path needs at least two values")
    for a, b in zip(values, values[1:]):
        if not symmat.loewner_leq(a, b, 1e-10):
            raise ValueError("step path must be increasing in the Loewner order")
    qs = tuple(l / k for l in range(k + 1))
    psi = MatrixPath(tuple(zip(qs, values)))
    alpha = DiscreteCdf(qs, tuple(pi.edges))
    return psi, alpha


def evaluate_pi(model, pi, base, grid=None, z=None):
    """``P(pi)`` through ``F(Psi, alpha) = P(Psi o alpha^{-1})``."""
    if z is not None and np.max(np.abs(pi.values[-1] - symmat.as_sym(z))) > 1e-12:
        raise ValueError("step path must end at z")
    psi, alpha = decompose_pi(pi)
    return evaluate(model, psi, alpha, base, grid).total


def theta_integral(model, pi):
    """``int_0^1 theta(pi(s)) ds`` for a step path."""
    total, prev = 0.0, 0.0
    for edge, v in zip(pi.edges, pi.values):
        total += (edge - prev) * theta(model, v)
        prev = edge
    return total

