"""Parisi PDE by levelwise Cole-Hopf recursion on a rotated tensor grid.

For a step CDF ``alpha`` with levels ``(q_l, m_l)`` the solution satisfies
``Phi(1, .) = phi`` and, for ``s`` in ``[q_{l-1}, q_l)``,

    Phi(s, x) = (1/m) log E exp(m Phi(q_l, x + sqrt(mu(q_l) - mu(s)) g)),  m = m_{l-1},

read as a plain Gaussian average when ``m == 0``. Each Gaussian average is a
product of 1-D Gauss-Hermite rules along the eigenvectors of the covariance;
the grid is rotated to that eigenbasis whenever the current axes do not
diagonalize it.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels, symmat
from .grid import GridFunction
from .paths import DiscreteCdf, cdf_distance

EIG_TOL = 1e-12
GRID_MAX_DIM = 4


@dataclass(frozen=True)
class GridSpec:
    """Half-width ``L`` (``None`` picks the default from the model), spacing ``h``,
    and the number of Gauss-Hermite nodes per 1-D convolution."""

    L: float = None
    h: float = 0.05
    quad_nodes: int = 21

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid spacing h must be positive")
        if self.L is not None and self.L <= 2 * self.h:
            raise ValueError("grid half-width L must exceed 2h")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be >= 2")

    @classmethod
    def from_config(cls, cfg):
        cfg = cfg or {}
        return cls(cfg.get("L"), float(cfg.get("h", 0.05)), int(cfg.get("quad_nodes", 21)))

    def to_config(self):
        return {"L": self.L, "h": self.h, "quad_nodes": self.quad_nodes}

    def resolve(self, base, derived):
        """Default ``L = 6 max|sigma| (1 + sqrt(lambda_max(mu(1))))``."""
        if base.dim > GRID_MAX_DIM:
            raise ValueError(f"the grid solver supports D <= {GRID_MAX_DIM}, got {base.dim}")
        if self.L is not None:
            L = self.L
        else:
            lam = max(float(np.linalg.eigvalsh(derived.mu(1.0))[-1]), 0.0)
            L = 6.0 * max(base.max_norm, 1e-3) * (1.0 + np.sqrt(lam))
        half = int(np.ceil(L / self.h))
        return GridSpec(half * self.h, self.h, self.quad_nodes)

    @property
    def n(self):
        return 2 * int(round(self.L / self.h)) + 1


class BaseMeasure:
    """Finite atomic measure ``sum_a w_a delta_{sigma_a}`` on the closed unit ball."""

    def __init__(self, points, weights):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.asarray(weights, dtype=float).ravel()
        if pts.shape[0] == 0:
            raise ValueError("base measure needs at least one atom")
        if pts.shape[0] != w.size:
            raise ValueError("points and weights differ in length")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if np.any(np.linalg.norm(pts, axis=1) > 1 + 1e-12):
            raise ValueError("atoms must lie in the closed unit ball")
        self.points = pts
        self.weights = w

    @classmethod
    def potts(cls, dim):
        return cls(np.eye(dim), np.full(dim, 1.0 / dim))

    @classmethod
    def ising(cls):
        return cls(np.array([[1.0], [-1.0]]), np.array([0.5, 0.5]))

    @classmethod
    def from_config(cls, cfg, dim=None):
        preset = cfg.get("preset")
        if preset == "potts":
            return cls.potts(int(cfg.get("dim", dim)))
        if preset == "ising":
            return cls.ising()
        if preset is not None:
            raise ValueError(f"unknown base preset {preset!r}")
        atoms = cfg["atoms"]
        return cls([a[0] for a in atoms], [a[1] for a in atoms])

    def to_config(self):
        return {"atoms": [[list(map(float, p)), float(w)] for p, w in zip(self.points, self.weights)]}

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def max_norm(self):
        return float(np.linalg.norm(self.points, axis=1).max())

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def is_dirac(self):
        return bool(np.all(np.abs(self.points - self.points[0]) < 1e-14))

    def reweighted(self, factors):
        return BaseMeasure(self.points, self.weights * np.asarray(factors, dtype=float))

    def _gibbs(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        e = x @ self.points.T
        lse = logsumexp(e, axis=1, b=self.weights)
        p = self.weights * np.exp(e - lse[:, None])
        return lse, p

    def phi(self, x):
        """``log sum_a w_a exp(x . sigma_a)`` at points ``x`` (N, D)."""
        x = np.asarray(x, dtype=float)
        out = self._gibbs(x)[0]
        return float(out[0]) if x.ndim == 1 else out

    def grad_phi(self, x):
        """Gibbs mean of ``sigma`` at ``x``."""
        x = np.asarray(x, dtype=float)
        _, p = self._gibbs(x)
        out = p @ self.points
        return out[0] if x.ndim == 1 else out

    def hess_phi(self, x):
        """Gibbs covariance of ``sigma`` at ``x``."""
        x = np.asarray(x, dtype=float)
        _, p = self._gibbs(x)
        mean = p @ self.points
        second = np.einsum("na,ai,aj->nij", p, self.points, self.points)
        out = second - np.einsum("ni,nj->nij", mean, mean)
        return out[0] if x.ndim == 1 else out


def gauss_hermite(n):
    """Nodes and weights for ``E f(g)``, ``g ~ N(0, 1)``."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / w.sum()


def terminal(base, grid, rot=None):
    """Grid function ``phi(x) = log sum w exp(x . sigma)`` (exact at the nodes)."""
    if base.dim != (rot.shape[0] if rot is not None else base.dim):
        raise ValueError("rotation and base dimensions differ")
    return GridFunction.from_callable(base.phi, base.dim, grid.n, grid.h, rot)


def _diagonal_in(rot, cov):
    c = rot.T @ cov @ rot
    off = c - np.diag(np.diag(c))
    return np.max(np.abs(off)) <= 1e-12 * max(1.0, np.max(np.abs(c))), np.diag(c)


def propagate_level(phi_next, cov, m, quad_nodes=21, eig_tol=EIG_TOL):
    """``x -> (1/m) log E exp(m phi_next(x + sqrt(cov) g))``; Gaussian mean if ``m == 0``.

    Directions with eigenvalue at most ``eig_tol`` are left untouched, which
    handles rank-deficient covariances exactly.
    """
    m = float(m)
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"m must lie in [0, 1], got {m}")
    cov = symmat.as_sym(cov, phi_next.dim)
    if not symmat.is_psd(cov, max(symmat.PSD_TOL, 1e-12 * symmat.frobenius_norm(cov))):
        raise symmat.NotPsd(f"covariance increment is not PSD (min eig {symmat.min_eig(cov):.3e})")
    if np.all(np.linalg.eigvalsh(cov) <= eig_tol):
        return phi_next
    ok, lam = _diagonal_in(phi_next.rot, cov)
    gf = phi_next
    if not ok:
        lam, vecs = np.linalg.eigh(cov)
        gf = phi_next.resample(vecs)
    nodes, weights = gauss_hermite(quad_nodes)
    vals = gf.values
    n = gf.n
    for a, la in enumerate(lam):
        if la <= eig_tol:
            continue
        offsets = np.sqrt(la) * nodes / gf.h
        moved = np.moveaxis(vals, a, -1)
        shape = moved.shape
        out = kernels.smooth_lines(moved.reshape(-1, n), offsets, weights, m)
        vals = np.moveaxis(out.reshape(shape), -1, a)
    return gf.with_values(np.ascontiguousarray(vals))


def _first_frame(derived, alpha):
    """Eigenbasis of the first non-trivial covariance increment, so that the
    terminal condition is tabulated directly in a frame the solver can use."""
    qs = alpha.qs
    for l in range(len(qs) - 1, 0, -1):
        cov = derived.mu(qs[l]) - derived.mu(qs[l - 1])
        if np.linalg.eigvalsh(symmat.as_sym(cov))[-1] > EIG_TOL:
            return np.linalg.eigh(symmat.as_sym(cov))[1]
    return np.eye(derived.dim)


class PdeSolution:
    """Stored levels ``Phi(q_l, .)`` for ``l = 0..K`` plus on-demand evaluation
    at intermediate times by one extra propagation from the level above."""

    def __init__(self, base, derived, alpha, grid, levels):
        self.base = base
        self.derived = derived
        self.alpha = alpha
        self.grid = grid
        self.levels = levels
        self.meta = {}
        self._cache = {}

    @property
    def dim(self):
        return self.base.dim

    def at(self, s):
        """Grid function ``Phi(s, .)``."""
        s = float(s)
        if s >= 1.0:
            return self.levels[-1]
        if s < 0.0:
            raise ValueError("s must lie in [0, 1]")
        qs = self.alpha.qs
        for l, q in enumerate(qs):
            if s == q:
                return self.levels[l]
        if s in self._cache:
            return self._cache[s]
        l = self.alpha.level_index(s)  # s in [q_{l-1}, q_l)
        cov = self.derived.mu(qs[l]) - self.derived.mu(s)
        out = propagate_level(self.levels[l], cov, self.alpha.ms[l - 1], self.grid.quad_nodes)
        if len(self._cache) > 512:
            self._cache.clear()
        self._cache[s] = out
        return out

    def _check_inside(self, gf, x):
        margin = 2 * self.grid.h
        if not np.all(gf.inside(x, margin)):
            raise ValueError("query point outside the grid box minus the stencil margin")

    def value(self, s, x, check=True):
        gf = self.at(s)
        if check:
            self._check_inside(gf, x)
        return gf(x)

    def grad(self, s, x, check=True):
        gf = self.at(s)
        if check:
            self._check_inside(gf, x)
        return gf.grad(x)

    def hess(self, s, x, check=True):
        gf = self.at(s)
        if check:
            self._check_inside(gf, x)
        return gf.hess(x)

    def interior_points(self, fraction=0.5):
        """Nodes of ``Phi(0, .)`` within ``fraction`` of the half-width."""
        gf = self.levels[0]
        pts = gf.points()
        keep = np.all(np.abs(pts @ gf.rot) <= fraction * gf.half_width + 1e-12, axis=1)
        return pts[keep]

    def to_dict(self):
        out = {
            "schema": "vecparisi.pde_solution/1",
            "grid": self.grid.to_config(),
            "alpha": self.alpha.to_config(),
            "levels": [],
        }
        for q, gf in zip(self.alpha.qs, self.levels):
            out["levels"].append(
                {
                    "q": q,
                    "rotation": gf.rot.tolist(),
                    "axis": gf.coords().tolist(),
                    "values": gf.values.tolist(),
                }
            )
        return out

    def export_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    def export_csv(self, path):
        """Long format: ``level, q, x_1..x_D, phi`` (original coordinates)."""
        d = self.dim
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["level", "q"] + [f"x{i + 1}" for i in range(d)] + ["phi"])
            for l, (q, gf) in enumerate(zip(self.alpha.qs, self.levels)):
                for p, v in zip(gf.points(), gf.values.ravel()):
                    wr.writerow([l, repr(q)] + [repr(float(c)) for c in p] + [repr(float(v))])


def solve(base, derived, alpha, grid=None):
    """Definition of the discrete solution: tabulate ``phi`` and fold the levels
    from ``q_K = 1`` down to ``q_0 = 0``."""
    if base.dim != derived.dim:
        raise ValueError("base measure and model dimensions differ")
    grid = (grid or GridSpec()).resolve(base, derived)
    qs, ms = alpha.qs, alpha.ms
    rot = _first_frame(derived, alpha)
    levels = [None] * len(qs)
    levels[-1] = terminal(base, grid, rot)
    for l in range(len(qs) - 1, 0, -1):
        cov = derived.mu(qs[l]) - derived.mu(qs[l - 1])
        levels[l - 1] = propagate_level(levels[l], cov, ms[l - 1], grid.quad_nodes)
    return PdeSolution(base, derived, alpha, grid, levels)


def staircase(alpha_fn, n):
    """Step CDF on ``q_l = l/n`` taking the left-endpoint value ``alpha(q_{l-1})``."""
    qs = np.linspace(0.0, 1.0, n + 1)
    ms = [min(max(float(alpha_fn(q)), 0.0), 1.0) for q in qs[:-1]]
    ms = list(np.maximum.accumulate(ms))
    return DiscreteCdf(tuple(qs), tuple(ms) + (1.0,))


def _distance_to_callable(alpha_fn, step, sub=64):
    total = 0.0
    qs = step.qs
    for a, b in zip(qs, qs[1:]):
        if b <= a:
            continue
        t = a + (np.arange(sub) + 0.5) * (b - a) / sub
        vals = np.array([float(alpha_fn(x)) for x in t])
        total += np.abs(vals - step.evaluate(a)).mean() * (b - a)
    return total


def solve_general(base, derived, alpha_general, grid=None, n_approx=32):
    """Solution for a general CDF through a discrete approximation.

    ``alpha_general`` is a ``DiscreteCdf`` (solved as is) or a callable CDF,
    replaced by the left-endpoint staircase on ``n_approx`` equal cells. The
    result carries ``meta['lipschitz_budget'] = C d(alpha, alpha_n)`` with
    ``C`` the Lipschitz constant of ``mu``.
    """
    if isinstance(alpha_general, DiscreteCdf):
        sol = solve(base, derived, alpha_general, grid)
        dist = 0.0
    else:
        step = staircase(alpha_general, n_approx)
        sol = solve(base, derived, step, grid)
        dist = _distance_to_callable(alpha_general, step)
    c = derived.lipschitz_constant()
    sol.meta.update({"n_approx": n_approx, "d_M": dist, "lipschitz_C": c, "lipschitz_budget": c * dist})
    return sol


def sup_difference(sol_a, sol_b, s_values=(0.0,), fraction=0.5):
    """Max of ``|Phi_a(s, x) - Phi_b(s, x)|`` over interior nodes and the given times."""
    pts = sol_a.interior_points(fraction)
    best = 0.0
    for s in s_values:
        best = max(best, float(np.max(np.abs(sol_a.at(s)(pts) - sol_b.at(s)(pts)))))
    return best


def mc_residual_check(sol, alpha_continuous, points, ds=None):
    """Finite-difference residual of ``d_s Phi + 1/2 <gamma, Hess Phi + alpha grad grad^T>``.

    ``points`` is a sequence of ``(s, x)``; the time derivative is a central
    difference with step ``ds`` (default: the grid spacing ``h``), and
    ``alpha_continuous`` is the CDF used in the equation (a callable or a
    ``DiscreteCdf``).
    """
    ds = sol.grid.h if ds is None else ds
    res = []
    for s, x in points:
        x = np.asarray(x, dtype=float)
        lo, hi = max(s - ds, 0.0), min(s + ds, 1.0)
        dphi = (sol.at(hi)(x) - sol.at(lo)(x)) / (hi - lo)
        g = sol.at(s).grad(x)
        hm = sol.at(s).hess(x)
        a = float(alpha_continuous(s))
        gam = sol.derived.gamma(s)
        res.append(dphi + 0.5 * symmat.dot(gam, hm + a * np.outer(g, g)))
    res = np.abs(np.array(res))
    return {"max": float(res.max()), "mean": float(res.mean()), "n": int(res.size)}


def gradient_bound_check(sol, s_values=(0.0,), fraction=0.8, tol=1e-6):
    """``|grad Phi| <= max|sigma|`` at interior nodes; returns the worst excess."""
    worst = -np.inf
    for s in s_values:
        gf = sol.at(s)
        pts = sol.interior_points(fraction)
        norms = np.linalg.norm(gf.grad(pts), axis=1)
        worst = max(worst, float(norms.max() - sol.base.max_norm))
    return {"max_excess": worst, "passed": worst <= tol + 10 * sol.grid.h**2}


def hessian_bounds(sol, s_values=(0.0,), fraction=0.5):
    """Smallest Hessian eigenvalue and largest Frobenius norm over interior nodes.

    Convexity requires the first to be non-negative up to discretization; the
    second gives ``C = sqrt(D) sup|Hess Phi|`` with ``Hess Phi <= C Id``.
    """
    min_eig, max_norm, max_eig = np.inf, 0.0, -np.inf
    for s in s_values:
        pts = sol.interior_points(fraction)
        hs = sol.at(s).hess(pts)
        ev = np.linalg.eigvalsh(hs)
        min_eig = min(min_eig, float(ev[:, 0].min()))
        max_eig = max(max_eig, float(ev[:, -1].max()))
        max_norm = max(max_norm, float(np.sqrt((hs**2).sum(axis=(1, 2))).max()))
    c = np.sqrt(sol.dim) * max_norm
    return {"min_eig": min_eig, "max_eig": max_eig, "sup_norm": max_norm, "C": c}


def _increment_factor(derived, s, t):
    return symmat.psd_factor(derived.mu(t) - derived.mu(s), tol=1e-10)


def exp_v_check(sol, s, x, n_samples=20000, seed=0):
    """Monte-Carlo ``E e^{V(s, x)}`` together with the gradient representation
    ``grad Phi(s, x) = E[grad phi(x + M(1) - M(s)) e^V]``.

    ``V`` is accumulated level by level:
    ``V(s, x) = V(q_l, X_l) + m_{l-1} (Phi(q_l, X_l) - Phi(s, x))`` with
    ``X_l = x + M(q_l) - M(s)``.
    """
    rng = np.random.default_rng(seed)
    alpha = sol.alpha
    x = np.asarray(x, dtype=float)
    d = sol.dim
    times = [float(s)] + [q for q in alpha.qs if q > s]
    pos = np.tile(x, (n_samples, 1))
    prev_vals = np.full(n_samples, sol.at(s)(x))
    v = np.zeros(n_samples)
    for a, b in zip(times, times[1:]):
        f = _increment_factor(sol.derived, a, b)
        if f.shape[1]:
            pos = pos + rng.standard_normal((n_samples, f.shape[1])) @ f.T
        new_vals = sol.at(b)(pos)
        m = alpha.evaluate(a)
        v += m * (new_vals - prev_vals)
        prev_vals = new_vals
    ev = np.exp(v)
    grads = sol.base.grad_phi(pos) * ev[:, None]
    g_ref = sol.at(s).grad(x)
    return {
        "mean": float(ev.mean()),
        "stderr": float(ev.std(ddof=1) / np.sqrt(n_samples)),
        "grad_mc": grads.mean(axis=0).tolist(),
        "grad_stderr": (grads.std(axis=0, ddof=1) / np.sqrt(n_samples)).tolist(),
        "grad_grid": np.atleast_1d(g_ref).tolist(),
        "dim": d,
    }


def lipschitz_ratio(sol_a, sol_b, fraction=0.5):
    """``sup|Phi_a - Phi_b| / d(alpha_a, alpha_b)`` over interior nodes at ``s = 0``."""
    d = cdf_distance(sol_a.alpha, sol_b.alpha)
    if d == 0:
        return 0.0
    return sup_difference(sol_a, sol_b, (0.0,), fraction) / d


def phi_convexity_slack(base, derived, alpha0, alpha1, lam, s, x0, x1, grid=None):
    """Joint convexity in ``(alpha, x)``: returns
    ``(1 - lam) Phi_0(s, x0) + lam Phi_1(s, x1) - Phi_lam(s, x_lam)``,
    which is non-negative, with ``alpha_lam`` the mixture of the two CDFs and
    ``x_lam`` the matching mixture of the points."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    mixed = alpha0.mix(alpha1, lam)
    v0 = solve(base, derived, alpha0, grid).value(s, x0)
    v1 = solve(base, derived, alpha1, grid).value(s, x1)
    vm = solve(base, derived, mixed, grid).value(s, (1 - lam) * x0 + lam * x1)
    return float((1 - lam) * v0 + lam * v1 - vm)
