"""Minimization of ``alpha -> F(Psi, alpha)`` over step CDFs on a fixed q-grid.

For a fixed grid ``0 = q_0 < q_1 < ... < q_K = 1`` the free parameters are the
levels ``m = (m_0, ..., m_{K-1})`` in the polytope
``0 <= m_0 <= ... <= m_{K-1} <= 1``. Mixing two CDFs on the same grid mixes
their level vectors, so convexity of the functional in ``alpha`` is convexity
in ``m`` and projected gradient descent finds the unique minimizer.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .functional import evaluate
from .paths import DiscreteCdf, InvalidOrderParameter
from .pde import GridSpec


@dataclass(frozen=True)
class LineSearch:
    shrink: float = 0.5
    sufficient: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class OptimizeConfig:
    q_grid: tuple  # q_1 < ... < q_K = 1 (q_0 = 0 is implicit)
    tol_f: float = 1e-13
    tol_m: float = 1e-8
    max_iters: int = 200
    fd_step: float = 1e-3
    line_search: LineSearch = field(default_factory=LineSearch)
    workers: int = 1

    def __post_init__(self):
        q = tuple(float(v) for v in self.q_grid)
        if not q or q[-1] != 1.0 or q[0] <= 0.0 or any(b <= a for a, b in zip(q, q[1:])):
            raise InvalidOrderParameter(
                "(e.m,q): q_grid must satisfy 0 < q_1 < ... < q_K = 1"
            )
        object.__setattr__(self, "q_grid", q)
        if not 0 < self.fd_step < 0.5:
            raise ValueError("fd_step must lie in (0, 0.5)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @classmethod
    def uniform(cls, k, **kwargs):
        return cls(tuple((l + 1) / k for l in range(k)), **kwargs)

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        if "K" in cfg:
            k = int(cfg.pop("K"))
            cfg["q_grid"] = tuple((l + 1) / k for l in range(k))
        ls = cfg.pop("line_search", None)
        if ls is not None:
            cfg["line_search"] = LineSearch(**ls)
        return cls(**cfg)

    @property
    def qs(self):
        return (0.0,) + self.q_grid

    def alpha(self, levels, check=True):
        ms = tuple(float(v) for v in levels) + (1.0,)
        return DiscreteCdf(self.qs, ms) if check else DiscreteCdf.unchecked(self.qs, ms)


def project(m):
    """Euclidean projection onto ``{0 <= m_0 <= ... <= m_{K-1} <= 1}``:
    isotonic regression followed by clipping to the unit interval."""
    m = np.asarray(m, dtype=float)
    return np.clip(isotonic_regression(m).x, 0.0, 1.0)


@dataclass
class Objective:
    model: object
    psi: object
    base: object
    cfg: OptimizeConfig
    grid: GridSpec = None
    evaluations: int = 0

    def value(self, m, check=True):
        self.evaluations += 1
        alpha = self.cfg.alpha(m, check=check)
        return evaluate(self.model, self.psi, alpha, self.base, self.grid, check_terms=check)

    def total(self, m):
        return self.value(m, check=False).total

    def gradient(self, m):
        """Central differences in each level, one-sided next to the bounds.

        Probes may leave the monotone cone; the functional is still defined
        there through the same recursion, so unchecked CDFs are used."""
        h = self.cfg.fd_step
        probes = []
        for l in range(m.size):
            lo = m[l] - h >= 0.0
            hi = m[l] + h <= 1.0
            if lo and hi:
                probes.append((l, m[l] + h, m[l] - h, 2 * h))
            elif hi:
                probes.append((l, m[l] + h, m[l], h))
            else:
                probes.append((l, m[l], m[l] - h, h))

        def one(p):
            l, up, down, width = p
            a, b = m.copy(), m.copy()
            a[l], b[l] = up, down
            return (self.total(a) - self.total(b)) / width

        if self.cfg.workers > 1:
            with ThreadPoolExecutor(self.cfg.workers) as ex:
                return np.array(list(ex.map(one, probes)))
        return np.array([one(p) for p in probes])


@dataclass
class OptimizeResult:
    alpha: DiscreteCdf
    value: object
    trace: list
    converged: bool
    iterations: int
    evaluations: int

    def to_dict(self):
        return {
            "alpha": self.alpha.to_config(),
            "value": self.value.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "trace": self.trace,
        }

    def write_trace_csv(self, path):
        k = len(self.alpha.qs) - 1
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["iter", "value", "grad_norm"] + [f"m{l}" for l in range(k)])
            for row in self.trace:
                wr.writerow([row["iter"], repr(row["value"]), repr(row["grad_norm"])] + [repr(v) for v in row["m"]])


def minimize(model, psi, base, cfg, grid=None, start=None):
    """Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking.

    Stops when the projected-gradient residual ``|m - P(m - g)|_inf`` falls
    below ``tol_m`` or the decrease in one step falls below ``tol_f``. The
    best iterate is returned with ``converged = False`` if ``max_iters`` runs out.
    """
    obj = Objective(model, psi, base, cfg, grid)
    k = len(cfg.q_grid)
    m = project(np.full(k, 0.5) if start is None else np.asarray(start, dtype=float))
    if m.size != k:
        raise ValueError(f"start must have {k} levels")
    f = obj.total(m)
    g = obj.gradient(m)
    step = 1.0
    trace = []
    converged = False
    it = 0
    ls = cfg.line_search
    for it in range(1, cfg.max_iters + 1):
        resid = float(np.max(np.abs(m - project(m - g))))
        trace.append({"iter": it - 1, "value": f, "grad_norm": resid, "m": m.tolist()})
        if resid < cfg.tol_m:
            converged = True
            break
        t = step
        for _ in range(ls.max_backtracks):
            cand = project(m - t * g)
            fc = obj.total(cand)
            if fc <= f + ls.sufficient * float(g @ (cand - m)):
                break
            t *= ls.shrink
        else:
            break
        decrease = f - fc
        g_new = obj.gradient(cand)
        s, y = cand - m, g_new - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-300 else min(10 * t, 1e6)
        step = min(max(step, 1e-6), 1e6)
        m, f, g = cand, fc, g_new
        if 0 <= decrease < cfg.tol_f:
            trace.append({"iter": it, "value": f, "grad_norm": float(np.max(np.abs(m - project(m - g)))), "m": m.tolist()})
            converged = True
            break
    alpha = cfg.alpha(m)
    value = obj.value(m)
    return OptimizeResult(alpha, value, trace, converged, it, obj.evaluations)


def random_levels(rng, k):
    """A random feasible level vector (sorted uniforms)."""
    return np.sort(rng.uniform(0.0, 1.0, size=k))


def convexity_slack(obj, m0, m1, lam=0.5):
    """``(1 - lam) F(m0) + lam F(m1) - F((1 - lam) m0 + lam m1)``."""
    fm = obj.total((1 - lam) * m0 + lam * m1)
    return (1 - lam) * obj.total(m0) + lam * obj.total(m1) - fm


def certify_convexity(model, psi, base, q_grid, pairs=10, seed=0, grid=None, lam=0.5):
    """Midpoint strict-convexity slacks on random distinct level-vector pairs.

    The slack scales like ``|m0 - m1|^2``, so each is also reported divided
    by that squared distance."""
    cfg = OptimizeConfig(tuple(q_grid))
    obj = Objective(model, psi, base, cfg, grid)
    rng = np.random.default_rng(seed)
    k = len(cfg.q_grid)
    slacks, normalized = [], []
    for _ in range(pairs):
        m0, m1 = random_levels(rng, k), random_levels(rng, k)
        if np.array_equal(m0, m1):
            continue
        slacks.append(float(convexity_slack(obj, m0, m1, lam)))
        normalized.append(slacks[-1] / float(np.sum((m0 - m1) ** 2)))
    return {
        "pairs": len(slacks),
        "seed": seed,
        "lambda": lam,
        "min_slack": min(slacks) if slacks else float("nan"),
        "slacks": slacks,
        "min_normalized": min(normalized) if normalized else float("nan"),
        "normalized": normalized,
        "all_positive": bool(slacks) and min(slacks) > 0,
    }
