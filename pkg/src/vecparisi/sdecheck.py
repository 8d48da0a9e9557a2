"""Optimal-control representation of the PDE solution.

For ``0 <= s < t <= 1`` the solution satisfies
``Phi(s, x) = max_u E[Phi(t, x + int alpha gamma u dr + int sqrt(gamma) dB) - 1/2 int alpha <gamma, u u^T> dr]``
with the maximum at ``u*(r) = grad Phi(r, X(r))`` along
``dX = alpha gamma grad Phi(r, X) dr + sqrt(gamma) dB``.

The time grid contains the jump points of ``alpha`` so that ``alpha`` is
constant on every step. On a step ``[a, b]`` the noise is drawn with the exact
covariance ``mu(b) - mu(a)`` and the drift uses ``alpha(a) (mu(b) - mu(a)) u(a)``.
"""

from dataclasses import dataclass

import numpy as np

from . import symmat


@dataclass
class ControlProblem:
    sol: object
    x: tuple
    s: float = 0.0
    t: float = 1.0
    n_paths: int = 4096
    n_steps: int = 256
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.s < self.t <= 1.0:
            raise ValueError("need 0 <= s < t <= 1")
        if self.n_steps < 8:
            raise ValueError("n_steps must be >= 8")
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        self.x = np.asarray(self.x, dtype=float).reshape(self.sol.dim)

    def times(self):
        uni = np.linspace(self.s, self.t, self.n_steps + 1)
        jumps = [q for q in self.sol.alpha.qs if self.s < q < self.t]
        return np.unique(np.concatenate([uni, jumps]))


@dataclass
class SdeRun:
    cp: ControlProblem
    times: np.ndarray
    alphas: np.ndarray  # alpha on each step
    dmu: np.ndarray  # (steps, D, D) covariance increments
    X: np.ndarray  # (steps + 1, P, D)
    u: np.ndarray  # (steps, P, D), u* at the left end of each step
    noise: np.ndarray  # (P, D), int sqrt(gamma) dB
    exits: int
    martingale: np.ndarray = None  # (P,), sum_j u*_j . dN_j, mean zero
    increments: np.ndarray = None  # (steps, P, D), dN_j

    @property
    def drift(self):
        """``int alpha gamma u* dr`` per path."""
        return np.einsum("j,jab,jpb->pa", self.alphas, self.dmu, self.u)

    def cost(self, u):
        """``1/2 int alpha <gamma, u u^T> dr`` per path."""
        return 0.5 * np.einsum("j,jab,jpa,jpb->p", self.alphas, self.dmu, u, u)


def simulate_optimal(cp):
    """Euler scheme for the optimal SDE, recording ``u*`` along every path."""
    sol = cp.sol
    rng = np.random.default_rng(cp.seed)
    times = cp.times()
    steps = len(times) - 1
    d = sol.dim
    X = np.empty((steps + 1, cp.n_paths, d))
    U = np.empty((steps, cp.n_paths, d))
    X[0] = cp.x
    alphas = np.empty(steps)
    dmu = np.empty((steps, d, d))
    noise = np.zeros((cp.n_paths, d))
    mart = np.zeros(cp.n_paths)
    incs = np.zeros((steps, cp.n_paths, d))
    exits = np.zeros(cp.n_paths, dtype=bool)
    margin = 2 * sol.grid.h
    for j in range(steps):
        a, b = times[j], times[j + 1]
        gf = sol.at(a)
        exits |= ~gf.inside(X[j], margin)
        U[j] = gf.grad(X[j])
        alphas[j] = sol.alpha.evaluate(a)
        dmu[j] = symmat.as_sym(sol.derived.mu(b) - sol.derived.mu(a))
        f = symmat.psd_factor(dmu[j], tol=1e-10)
        dn = rng.standard_normal((cp.n_paths, f.shape[1])) @ f.T if f.shape[1] else 0.0
        noise = noise + dn
        if f.shape[1]:
            mart += np.einsum("pa,pa->p", U[j], dn)
            incs[j] = dn
        X[j + 1] = X[j] + alphas[j] * U[j] @ dmu[j] + dn
    exits |= ~sol.at(times[-1]).inside(X[-1], margin)
    return SdeRun(cp, times, alphas, dmu, X, U, noise, int(exits.sum()), mart, incs)


def _stats(v):
    v = np.asarray(v, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def _per_path_value(run, shift=None, scale=1.0):
    """``Phi(t, X^u(t)) - L(u)`` for ``u = scale u* + shift`` with common noise."""
    u = scale * run.u
    if shift is not None:
        u = u + np.asarray(shift, dtype=float)
    drift = np.einsum("j,jab,jpb->pa", run.alphas, run.dmu, u)
    xt = run.cp.x + drift + run.noise
    return run.cp.sol.at(run.cp.t)(xt) - run.cost(u)


def control_value(run, shift=None, scale=1.0, control_variate=True):
    """Monte-Carlo ``F(u, x)`` for ``u = scale u* + shift`` (``u*`` as recorded).

    With ``control_variate`` the mean-zero martingale ``sum_j u*_j . dN_j`` is
    subtracted path by path; the expectation is unchanged and, for ``u = u*``,
    most of the variance cancels.
    """
    v = _per_path_value(run, shift, scale)
    if control_variate:
        v = v - run.martingale
    mean, err = _stats(v)
    return {"mean": mean, "stderr": err}


def optimality_check(run, shifts=(), scales=()):
    """Compare ``u*`` with perturbed controls using common random numbers.

    Each entry reports the paired difference ``F(u*) - F(u)`` and its standard
    error; optimality means every difference is ``>= -3 stderr``.
    """
    base = _per_path_value(run)
    out = []
    for c in shifts:
        mean, err = _stats(base - _per_path_value(run, shift=c))
        out.append({"kind": "shift", "param": np.atleast_1d(c).tolist(), "gap": mean, "stderr": err})
    for lam in scales:
        mean, err = _stats(base - _per_path_value(run, scale=lam))
        out.append({"kind": "scale", "param": float(lam), "gap": mean, "stderr": err})
    return out


def martingale_check(run):
    """``E grad Phi(t, X(t)) = grad Phi(s, x)`` (the gradient is a martingale along X)."""
    sol, cp = run.cp.sol, run.cp
    g_end = sol.at(cp.t).grad(run.X[-1])
    g0 = sol.at(cp.s).grad(cp.x)
    diff = g_end - g0
    mean = diff.mean(axis=0)
    err = diff.std(axis=0, ddof=1) / np.sqrt(diff.shape[0])
    return {"mean_diff": mean.tolist(), "stderr": err.tolist(), "z": (np.abs(mean) / np.maximum(err, 1e-300)).tolist()}


def hessian_evolution_check(run, control_variate=True):
    """``E Hess Phi(t, X(t)) - Hess Phi(s, x) = -E int alpha Hess gamma Hess dr``.

    The per-path difference of the two sides is the stochastic integral
    ``int Phi_ikl (sqrt(gamma) dB)_i``; it has mean zero. With
    ``control_variate`` its Euler approximation is subtracted path by path,
    which leaves the mean unchanged and removes most of the variance.
    """
    sol, cp = run.cp.sol, run.cp
    h0 = sol.at(cp.s).hess(cp.x)
    lhs = sol.at(cp.t).hess(run.X[-1]) - h0
    rhs = np.zeros_like(lhs)
    stoch = np.zeros_like(lhs)
    h_next = sol.at(run.times[0]).hess(run.X[0])
    for j in range(len(run.alphas)):
        gf = sol.at(run.times[j])
        h_here = h_next
        h_next = sol.at(run.times[j + 1]).hess(run.X[j + 1])
        if run.alphas[j] != 0.0:
            # trapezoid in time for the drift integral
            rhs -= 0.5 * run.alphas[j] * (
                np.einsum("pik,ij,pjl->pkl", h_here, run.dmu[j], h_here)
                + np.einsum("pik,ij,pjl->pkl", h_next, run.dmu[j], h_next)
            )
        if control_variate and np.any(run.increments[j]):
            stoch += np.einsum("pikl,pi->pkl", gf.third(run.X[j]), run.increments[j])
    diff = lhs - rhs - stoch
    mean = diff.mean(axis=0)
    err = diff.std(axis=0, ddof=1) / np.sqrt(diff.shape[0])
    return {
        "lhs": lhs.mean(axis=0).tolist(),
        "rhs": rhs.mean(axis=0).tolist(),
        "mean_diff": mean.tolist(),
        "stderr": err.tolist(),
    }


def alpha_trace_integral(sol, s, t):
    """``int_s^t alpha tr(gamma) dr``, exact for step ``alpha``."""
    pts = sorted({s, t} | {q for q in sol.alpha.qs if s < q < t})
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        total += sol.alpha.evaluate(a) * float(np.trace(sol.derived.mu(b) - sol.derived.mu(a)))
    return total


def uniqueness_window_check(cp, c_hess):
    """Whether ``int_s^t alpha tr(gamma) < 1/C`` and ``alpha(s) > 0`` on the window."""
    integral = alpha_trace_integral(cp.sol, cp.s, cp.t)
    bound = np.inf if c_hess <= 0 else 1.0 / c_hess
    window_ok = bool(integral < bound)
    alpha_pos = bool(cp.sol.alpha.evaluate(cp.s) > 0)
    return {
        "integral": integral,
        "bound": float(bound),
        "window_ok": window_ok,
        "alpha_positive": alpha_pos,
        "holds": window_ok and alpha_pos,
    }


def run_checks(cp, shifts=None, scales=(0.5, 1.5)):
    """Value, optimality, and martingale checks for one control problem."""
    run = simulate_optimal(cp)
    if shifts is None:
        rng = np.random.default_rng(cp.seed + 1)
        shifts = [0.3 * rng.standard_normal(cp.sol.dim) for _ in range(5)]
    value = control_value(run)
    zero = _stats(_per_path_value(run, scale=0.0))
    phi_sx = float(cp.sol.at(cp.s)(cp.x))
    return {
        "phi_sx": phi_sx,
        "value_u_star": value,
        "value_zero_control": {"mean": zero[0], "stderr": zero[1]},
        "perturbations": optimality_check(run, shifts, scales),
        "martingale": martingale_check(run),
        "exits": run.exits,
        "steps": len(run.alphas),
    }


def direction_constancy(run, w):
    """Max over paths and times of ``|X(r) . w - x . w|``; zero when ``gamma w = 0``."""
    w = np.asarray(w, dtype=float)
    return float(np.max(np.abs(run.X @ w - float(run.cp.x @ w))))
