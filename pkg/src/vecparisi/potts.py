"""The Potts specialization.

The base measure is uniform on the standard basis ``e_1, ..., e_D``, the path
is ``Psi*(s) = (s/D) Id + ((1-s)/D^2) 1`` ending at ``z = Id/D``, and the
special vectors are ``w = (1, ..., 1)`` and ``v_k = D e_k - w``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import symmat
from .functional import tilt
from .model import MixtureModel, grad_xi
from .optimize import OptimizeConfig, certify_convexity, minimize, random_levels
from .paths import DerivedPath, DiscreteCdf, psi_star
from .pde import BaseMeasure, GridSpec, solve

IDENTITY_TOL = 1e-12


@dataclass
class PottsSetup:
    dim: int
    betas: tuple  # ((p, beta_p), ...)
    model: MixtureModel = field(init=False)
    base: BaseMeasure = field(init=False)
    psi: object = field(init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("Potts setups need D >= 2")
        self.model = MixtureModel(self.dim, tuple(self.betas), "potts_hadamard")
        self.betas = self.model.betas
        self.base = BaseMeasure.potts(self.dim)
        self.psi = psi_star(self.dim)

    @property
    def z(self):
        return np.eye(self.dim) / self.dim

    @property
    def w(self):
        return np.ones(self.dim)

    def v(self, k):
        return self.dim * np.eye(self.dim)[k] - self.w

    @property
    def beta2(self):
        return dict(self.betas).get(2, 0.0)

    def quadratic_only(self):
        return self.model.is_quadratic()

    @property
    def derived(self):
        return DerivedPath(self.model, self.psi)

    def tilt_shift(self):
        """``-1/2 grad_xi(z) . e_k e_k^T``, the same for every atom ``e_k``."""
        return -0.5 * float(grad_xi(self.model, self.z)[0, 0])


def _err(a, b):
    return float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))


def sum_vv(dim):
    """``sum_k v_k v_k^T`` in integer arithmetic."""
    w = np.ones(dim, dtype=np.int64)
    total = np.zeros((dim, dim), dtype=np.int64)
    for k in range(dim):
        v = dim * np.eye(dim, dtype=np.int64)[k] - w
        total += np.outer(v, v)
    return total


def path_identities(dim, n_random=100, seed=0):
    """Identities of ``Psi*`` that do not involve the model.

    ``sum_k v_k v_k^T = D^2 Id - D 1`` exactly; the Hadamard product
    ``Psi o Psi' = (s(D-1)/D^3) Id + ((1-s)/D^2) Psi'``; the lower bound
    ``Psi(s) >= (s/D) Id``; and ``x^T Psi' x = sum x_k^2/D - (sum x_k/D)^2 >= 0``.
    """
    psi = psi_star(dim)
    eye, one = np.eye(dim), np.ones((dim, dim))
    svv = sum_vv(dim)
    exact = bool(np.array_equal(svv, dim * dim * np.eye(dim, dtype=np.int64) - dim * np.ones((dim, dim), dtype=np.int64)))
    s_grid = np.linspace(0.0, 1.0, 11)
    had_err, lower_ok = 0.0, True
    for s in s_grid:
        p, pd = psi.value(s), psi.derivative(s)
        had_err = max(had_err, _err(p * pd, (s * (dim - 1) / dim**3) * eye + ((1 - s) / dim**2) * pd))
        lower_ok &= symmat.loewner_leq((s / dim) * eye, p, 1e-14)
    rng = np.random.default_rng(seed)
    pd = psi.derivative(0.0)
    quad_err, quad_min = 0.0, np.inf
    for _ in range(n_random):
        x = rng.normal(size=dim)
        q = float(x @ pd @ x)
        quad_err = max(quad_err, abs(q - (np.sum(x * x) / dim - (np.sum(x) / dim) ** 2)))
        quad_min = min(quad_min, q)
    return {
        "dim": dim,
        "sum_vv_exact": exact,
        "psi_psidot_err": had_err,
        "psi_lower_bound": bool(lower_ok),
        "xpsidotx_err": quad_err,
        "xpsidotx_min": quad_min,
        "endpoint_err": _err(psi.z, eye / dim),
        "passed": exact and had_err <= 1e-14 and lower_ok and quad_err <= IDENTITY_TOL
        and quad_min >= -IDENTITY_TOL and _err(psi.z, eye / dim) == 0.0,
        "ones_psidot": _err(pd @ one, 0.0),
    }


def gamma_identities(setup, s_values=None):
    """The four closed forms of ``gamma`` for the quadratic Potts model and the
    closed form of the increments ``mu(t) - mu(s) = 2 (t - s) beta_2^2 Psi'``."""
    if not setup.quadratic_only():
        raise ValueError("gamma identities hold only for the quadratic (beta_2 only) model")
    d, b2 = setup.dim, setup.beta2
    eye, one, w = np.eye(d), np.ones((d, d)), setup.w
    der = setup.derived
    pd = setup.psi.derivative(0.0)
    closed = (2 * b2 * b2 / d**2) * (d * eye - one)
    via_v = (2 * b2 * b2 / d**3) * sum_vv(d)
    s_values = np.linspace(0.0, 1.0, 11) if s_values is None else s_values
    errs = {"potts2": 0.0, "psidot": 0.0, "sumvv": 0.0, "square": 0.0, "kernel": 0.0, "increment": 0.0, "sqrt_increment": 0.0}
    # Psi' = (Id - 1/D)/D is 1/D times a projection, so its root is exact.
    sqrt_pd = (eye - one / d) / np.sqrt(d)
    errs["sqrt_psidot"] = _err(sqrt_pd @ sqrt_pd, pd)
    root_dev = 0.0
    for s in s_values:
        g = der.gamma(s)
        errs["potts2"] = max(errs["potts2"], _err(g, closed))
        errs["psidot"] = max(errs["psidot"], _err(g, 2 * b2 * b2 * setup.psi.derivative(s)))
        errs["sumvv"] = max(errs["sumvv"], _err(g, via_v))
        errs["square"] = max(errs["square"], _err(g @ g, (2 * b2 * b2 / d) * g))
        errs["kernel"] = max(errs["kernel"], _err(g @ w, 0.0))
        t = min(1.0, s + 0.37)
        inc = der.mu(t) - der.mu(s)
        errs["increment"] = max(errs["increment"], _err(inc, 2 * (t - s) * b2 * b2 * pd))
        root = np.sqrt(2 * (t - s)) * b2 * sqrt_pd
        errs["sqrt_increment"] = max(errs["sqrt_increment"], _err(root @ root, inc), _err(root @ w, 0.0))
        # The eigen-root of the rank-deficient increment resolves the zero
        # eigenvalue only to about sqrt(machine epsilon); reported, not asserted.
        root_dev = max(root_dev, _err(symmat.sqrt_psd(inc), root))
    return {
        "dim": d,
        "beta2": b2,
        "errors": errs,
        "eigen_root_deviation": root_dev,
        "gamma": closed.tolist(),
        "passed": max(errs.values()) <= IDENTITY_TOL,
    }


def gamma_pd_check(setup, s_values=None):
    """For models with some ``beta_p > 0``, ``p >= 3``: ``gamma(s)`` is positive
    definite on ``(0, 1]`` and dominates the Schur-product lower bound
    ``p (p-1) beta_p^2 Psi^{o(p-3)} o (Psi o Psi')``, itself positive definite."""
    higher = [(p, b) for p, b in setup.betas if p >= 3 and b > 0]
    if not higher:
        raise ValueError("gamma_pd_check needs some beta_p > 0 with p >= 3")
    der = setup.derived
    s_values = np.linspace(0.1, 1.0, 10) if s_values is None else s_values
    rows = []
    for s in s_values:
        g = der.gamma(s)
        psi, pd = setup.psi.value(s), setup.psi.derivative(s)
        bound_min = np.inf
        dominated = True
        for p, b in higher:
            lower = p * (p - 1) * b * b * psi ** (p - 3) * (psi * pd)
            bound_min = min(bound_min, symmat.min_eig(lower))
            dominated &= symmat.loewner_leq(lower, g, 1e-12)
        rows.append({"s": float(s), "gamma_min_eig": symmat.min_eig(g), "bound_min_eig": bound_min, "dominated": bool(dominated)})
    g0 = der.gamma(0.0)
    return {
        "dim": setup.dim,
        "rows": rows,
        "gamma0_min_eig": symmat.min_eig(g0),
        "gamma0_psd": symmat.is_psd(g0, 1e-12),
        "passed": all(r["gamma_min_eig"] > 0 and r["bound_min_eig"] > 0 and r["dominated"] for r in rows)
        and symmat.is_psd(g0, 1e-12),
    }


def _random_points(rng, n, dim, scale=2.0):
    return rng.uniform(-scale, scale, size=(n, dim))


def kernel_checks(setup, n_points=100, seed=0):
    """The kernel of ``Hess phi(x)`` is the line through ``w``: ``w^T Hess phi w = 0``,
    ``v_k^T Hess phi v_k > 0``, and ``y^T Hess phi y > 0`` for ``y`` not along ``w``."""
    rng = np.random.default_rng(seed)
    d = setup.dim
    xs = _random_points(rng, n_points, d)
    hs = setup.base.hess_phi(xs)
    w = setup.w
    w_vals = np.einsum("i,nij,j->n", w, hs, w)
    y3 = 3 * w
    y3_vals = np.einsum("i,nij,j->n", y3, hs, y3)
    v_min = np.inf
    for k in range(d):
        v = setup.v(k)
        v_min = min(v_min, float(np.einsum("i,nij,j->n", v, hs, v).min()))
    ys = rng.normal(size=(n_points, d))
    y_vals = np.einsum("ni,nij,nj->n", ys, hs, ys)
    return {
        "points": n_points,
        "w_max_abs": float(np.max(np.abs(w_vals))),
        "3w_max_abs": float(np.max(np.abs(y3_vals))),
        "v_min": v_min,
        "generic_min": float(y_vals.min()),
        "passed": bool(np.max(np.abs(w_vals)) <= 1e-10 and np.max(np.abs(y3_vals)) <= 1e-10 and v_min > 0 and y_vals.min() > 0),
    }


def degenerate_direction_checks(setup, grid=None, alpha=None, n_points=100, seed=0, s_values=(0.0, 0.25, 0.6)):
    """Kernel checks on the exact ``Hess phi`` plus ``v_k^T Hess Phi(s, x) v_k > 0``
    and ``w^T Hess Phi(s, x) w ~ 0`` on the grid solution."""
    out = {"terminal": kernel_checks(setup, n_points, seed)}
    alpha = alpha or DiscreteCdf((0.0, 0.5, 1.0), (0.3, 0.7, 1.0))
    sol = solve(tilt(setup.base, setup.model, setup.z), setup.derived, alpha, grid)
    rng = np.random.default_rng(seed + 1)
    v_min, w_max = np.inf, 0.0
    for s in s_values:
        xs = _random_points(rng, n_points // len(s_values) + 1, setup.dim, 0.3 * sol.grid.L)
        hs = sol.hess(s, xs)
        for k in range(setup.dim):
            v = setup.v(k)
            v_min = min(v_min, float(np.einsum("i,nij,j->n", v, hs, v).min()))
        w_max = max(w_max, float(np.max(np.abs(np.einsum("i,nij,j->n", setup.w, hs, setup.w)))))
    out["pde"] = {"alpha": alpha.to_config(), "v_min": v_min, "w_max_abs": w_max, "passed": v_min > 0}
    out["passed"] = out["terminal"]["passed"] and out["pde"]["passed"]
    return out


def permutation_symmetry(sol, n_points=50, seed=0, s=0.0):
    """Max ``|Phi(s, P x) - Phi(s, x)|`` over random points and random permutations."""
    rng = np.random.default_rng(seed)
    xs = _random_points(rng, n_points, sol.dim, 0.3 * sol.grid.L)
    perm = np.stack([rng.permutation(sol.dim) for _ in range(n_points)])
    xp = np.take_along_axis(xs, perm, axis=1)
    gf = sol.at(s)
    return float(np.max(np.abs(gf(xp) - gf(xs))))


def tilt_shift_check(setup, alpha=None, grid=None):
    """``tilde P_1 = e^{c} P_1`` with ``c = -1/2 grad_xi(z)_kk`` (``-beta_2^2/D``
    for the quadratic model), so the tilted solution is the untilted one plus ``c``."""
    alpha = alpha or DiscreteCdf((0.0, 0.5, 1.0), (0.3, 0.7, 1.0))
    tilted = tilt(setup.base, setup.model, setup.z)
    factors = tilted.weights / setup.base.weights
    c = setup.tilt_shift()
    a = solve(tilted, setup.derived, alpha, grid)
    b = solve(setup.base, setup.derived, alpha, grid)
    diff = max(float(np.max(np.abs(la.values - lb.values - c))) for la, lb in zip(a.levels, b.levels))
    expected = -setup.beta2**2 / setup.dim if setup.quadratic_only() else c
    return {
        "shift": c,
        "expected": expected,
        "factor_spread": float(np.ptp(np.log(factors))),
        "max_level_err": diff,
        "passed": diff <= 1e-10 and abs(c - expected) <= 1e-12 and float(np.ptp(np.log(factors))) <= 1e-12,
    }


def potts_convexity_experiment(setup, pairs=5, seed=0, grid=None, k=4, starts=3, max_iters=100):
    """Strict-convexity slacks on ``Psi*``, the constant-tilt fact, and a
    multi-start minimization with the spread of its results."""
    grid = grid or GridSpec(h=0.1)
    q_grid = tuple((l + 1) / k for l in range(k))
    report = {
        "dim": setup.dim,
        "betas": [list(b) for b in setup.betas],
        "convexity": certify_convexity(setup.model, setup.psi, setup.base, q_grid, pairs, seed, grid),
        "tilt": tilt_shift_check(setup, grid=grid),
    }
    cfg = OptimizeConfig(q_grid, max_iters=max_iters, tol_m=1e-7)
    rng = np.random.default_rng(seed + 7)
    runs = []
    for _ in range(starts):
        res = minimize(setup.model, setup.psi, setup.base, cfg, grid, start=random_levels(rng, k))
        runs.append({"levels": res.alpha.levels.tolist(), "value": res.value.total, "converged": res.converged})
    levels = np.array([r["levels"] for r in runs])
    values = np.array([r["value"] for r in runs])
    report["minimize"] = {
        "runs": runs,
        "level_spread": float(np.max(np.ptp(levels, axis=0))),
        "value_spread": float(np.ptp(values)),
    }
    report["passed"] = report["convexity"]["all_positive"] and report["tilt"]["passed"]
    return report
