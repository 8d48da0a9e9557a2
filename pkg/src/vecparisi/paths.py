"""Order parameters: step CDFs, piecewise-linear matrix paths, and the derived
covariance path ``mu = grad_xi o Psi`` with its derivative ``gamma``.
"""

import bisect
from dataclasses import dataclass

import numpy as np

from . import symmat
from .model import grad_xi, hess_xi_dir, theta


class InvalidOrderParameter(ValueError):
    """Ordering constraints ``0 = m_{-1} <= m_0 <= ... <= m_K = 1`` and
    ``0 = q_0 <= q_1 < ... < q_K = 1`` are violated."""


@dataclass(frozen=True)
class DiscreteCdf:
    """``alpha = sum_l (m_l - m_{l-1}) 1[q_l, inf)`` restricted to ``[0, 1]``.

    ``qs`` and ``ms`` both have length ``K + 1``. Repeated levels in ``ms`` are
    allowed; they describe the same CDF with a redundant breakpoint.
    """

    qs: tuple
    ms: tuple

    def __post_init__(self):
        qs = tuple(float(q) for q in self.qs)
        ms = tuple(float(m) for m in self.ms)
        object.__setattr__(self, "qs", qs)
        object.__setattr__(self, "ms", ms)
        if len(qs) != len(ms) or len(qs) < 2:
            raise InvalidOrderParameter(
                "(e.m,q): qs and ms must have equal length K+1 >= 2"
            )
        if qs[0] != 0.0 or qs[-1] != 1.0:
            raise InvalidOrderParameter("(e.m,q): need q_0 = 0 and q_K = 1")
        if any(b <= a for a, b in zip(qs[1:-1], qs[2:])) or qs[1] < qs[0]:
            raise InvalidOrderParameter("(e.m,q): qs must satisfy q_0 <= q_1 < ... < q_K")
        if ms[-1] != 1.0 or ms[0] < 0.0:
            raise InvalidOrderParameter("(e.m,q): need 0 <= m_0 and m_K = 1")
        if any(b < a for a, b in zip(ms, ms[1:])):
            raise InvalidOrderParameter("(e.m,q): ms must be non-decreasing")

    @classmethod
    def unchecked(cls, qs, ms):
        """Build without validation (finite-difference probes outside the polytope)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "qs", tuple(float(q) for q in qs))
        object.__setattr__(obj, "ms", tuple(float(m) for m in ms))
        return obj

    @classmethod
    def one_step(cls, q):
        """``1[q, inf)``; for ``q == 1`` this is the trivial one-level CDF."""
        if q >= 1.0:
            return cls((0.0, 1.0), (0.0, 1.0))
        if q <= 0.0:
            return cls((0.0, 1.0), (1.0, 1.0))
        return cls((0.0, q, 1.0), (0.0, 1.0, 1.0))

    @classmethod
    def from_levels(cls, qs, levels):
        """CDF equal to ``levels[l]`` on ``[qs[l], qs[l+1])`` with ``qs[-1] == 1``."""
        return cls(tuple(qs), tuple(levels) + (1.0,))

    @classmethod
    def from_config(cls, cfg):
        return cls(tuple(cfg["qs"]), tuple(cfg["ms"]))

    def to_config(self):
        return {"qs": list(self.qs), "ms": list(self.ms)}

    @property
    def K(self):
        return len(self.qs) - 1

    @property
    def levels(self):
        """``m_0, ..., m_{K-1}``: the free parameters on a fixed q-grid."""
        return np.array(self.ms[:-1])

    def with_levels(self, levels, check=True):
        ms = tuple(levels) + (1.0,)
        return DiscreteCdf(self.qs, ms) if check else DiscreteCdf.unchecked(self.qs, ms)

    def __call__(self, s):
        return self.evaluate(s)

    def evaluate(self, s):
        if s >= 1.0:
            return 1.0
        if s < 0.0:
            return 0.0
        return self.ms[bisect.bisect_right(self.qs, s) - 1]

    def quantile(self, s):
        """Left-continuous inverse: ``q_0`` at 0 and ``q_l`` on ``(m_{l-1}, m_l]``."""
        if s <= 0.0:
            return self.qs[0]
        return self.qs[min(bisect.bisect_left(self.ms, s), self.K)]

    def mass(self):
        """``(q_l, m_l - m_{l-1})`` atoms of ``d alpha``."""
        prev = 0.0
        out = []
        for q, m in zip(self.qs, self.ms):
            out.append((q, m - prev))
            prev = m
        return out

    def level_index(self, s):
        """Index ``l`` in ``1..K`` with ``s in [q_{l-1}, q_l)``; ``s == 1`` maps to ``K + 1``."""
        if s >= 1.0:
            return self.K + 1
        return bisect.bisect_right(self.qs, s)

    def mix(self, other, lam):
        """``(1 - lam) self + lam other`` as a step CDF on the merged q-grid."""
        qs = sorted(set(self.qs) | set(other.qs))
        ms = [(1 - lam) * self.evaluate(q) + lam * other.evaluate(q) for q in qs[:-1]]
        return DiscreteCdf(tuple(qs), tuple(ms) + (1.0,))


def cdf_distance(a, b):
    """Exact ``int_0^1 |a(r) - b(r)| dr`` for step CDFs."""
    pts = sorted(set(a.qs) | set(b.qs))
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        total += abs(a.evaluate(lo) - b.evaluate(lo)) * (hi - lo)
    return total


def quantile_distance(a, b):
    """Exact ``int_0^1 |a^{-1}(s) - b^{-1}(s)| ds`` (equals ``cdf_distance``)."""
    pts = sorted({0.0, 1.0} | {m for m in a.ms if 0 < m < 1} | {m for m in b.ms if 0 < m < 1})
    total = 0.0
    for lo, hi in zip(pts, pts[1:]):
        mid = 0.5 * (lo + hi)
        total += abs(a.quantile(mid) - b.quantile(mid)) * (hi - lo)
    return total


@dataclass(frozen=True)
class MatrixPath:
    """Piecewise-linear increasing path ``s -> Psi(s)`` in the PSD cone."""

    knots: tuple  # ((s, matrix), ...)

    def __post_init__(self):
        ks = tuple((float(s), symmat.as_sym(v)) for s, v in self.knots)
        if len(ks) < 2:
            raise ValueError("a matrix path needs at least two knots")
        ss = [s for s, _ in ks]
        if ss[0] != 0.0 or ss[-1] != 1.0 or any(b <= a for a, b in zip(ss, ss[1:])):
            raise ValueError("knot locations must increase strictly from 0 to 1")
        dim = ks[0][1].shape[0]
        for _, v in ks:
            if v.shape != (dim, dim):
                raise ValueError("all knots must have the same dimension")
        for (_, a), (_, b) in zip(ks, ks[1:]):
            if not symmat.loewner_leq(a, b, 1e-10):
                raise ValueError("matrix path must be increasing in the Loewner order")
        if not symmat.is_psd(ks[0][1], 1e-10):
            raise ValueError("matrix path must start in the PSD cone")
        object.__setattr__(self, "knots", ks)

    @classmethod
    def linear(cls, start, end):
        return cls(((0.0, start), (1.0, end)))

    @classmethod
    def from_config(cls, cfg, dim=None):
        if "preset" in cfg:
            preset = cfg["preset"]
            if preset == "potts_star":
                return psi_star(int(cfg.get("dim", dim)))
            if preset == "linear_1d":
                z = float(cfg["z"])
                return cls.linear(np.zeros((1, 1)), np.array([[z]]))
            if preset == "constant":
                v = symmat.from_json(cfg["value"])
                return cls(((0.0, v), (1.0, v)))
            raise ValueError(f"unknown path preset {preset!r}")
        return cls(tuple((s, np.array(v, dtype=float)) for s, v in cfg["knots"]))

    def to_config(self):
        return {"knots": [[s, symmat.to_json(v)] for s, v in self.knots]}

    @property
    def dim(self):
        return self.knots[0][1].shape[0]

    @property
    def z(self):
        return self.knots[-1][1]

    def _segment(self, s):
        ss = [k[0] for k in self.knots]
        i = min(max(bisect.bisect_right(ss, s) - 1, 0), len(ss) - 2)
        return i

    def __call__(self, s):
        return self.value(s)

    def value(self, s):
        s = min(max(float(s), 0.0), 1.0)
        i = self._segment(s)
        (s0, a), (s1, b) = self.knots[i], self.knots[i + 1]
        t = (s - s0) / (s1 - s0)
        return (1 - t) * a + t * b

    def derivative(self, s):
        """Right derivative (left derivative at ``s == 1``)."""
        s = min(max(float(s), 0.0), 1.0)
        i = self._segment(s)
        (s0, a), (s1, b) = self.knots[i], self.knots[i + 1]
        return (b - a) / (s1 - s0)

    def breakpoints(self):
        return [k[0] for k in self.knots]


def psi_star(dim):
    """Symmetric Potts path ``(s/D) Id + ((1-s)/D^2) 1``, ending at ``Id/D``."""
    if dim < 2:
        raise ValueError("psi_star requires dim >= 2")
    start = np.ones((dim, dim)) / dim**2
    end = np.eye(dim) / dim
    return MatrixPath.linear(start, end)


@dataclass(frozen=True)
class StepPath:
    """Left-continuous step path: ``values[0]`` at 0 and ``values[l]`` on
    ``(edges[l-1], edges[l]]`` with ``edges[-1] == 1`` (``edges[-1]`` stands
    for ``m_{-1} = 0``)."""

    edges: tuple  # m_0, ..., m_K
    values: tuple  # matrices V_0, ..., V_K

    def __call__(self, s):
        if s <= 0.0:
            return self.values[0]
        l = min(bisect.bisect_left(self.edges, s), len(self.edges) - 1)
        return self.values[l]

    @property
    def dim(self):
        return self.values[0].shape[0]


def compose_pi(psi, alpha):
    """``s -> Psi(alpha^{-1}(s))`` as a step path."""
    return StepPath(tuple(alpha.ms), tuple(psi.value(q) for q in alpha.qs))


class DerivedPath:
    """``mu(s) = grad_xi(Psi(s))`` and ``gamma(s) = d mu / ds`` in closed form."""

    def __init__(self, model, psi):
        if model.dim != psi.dim:
            raise ValueError("model and path dimensions differ")
        self.model = model
        self.psi = psi

    @property
    def dim(self):
        return self.model.dim

    def mu(self, s):
        return grad_xi(self.model, self.psi.value(s))

    def gamma(self, s):
        return hess_xi_dir(self.model, self.psi.value(s), self.psi.derivative(s))

    def theta_psi(self, s):
        return theta(self.model, self.psi.value(s))

    def increment(self, s, t):
        """``mu(t) - mu(s)`` for ``s <= t``."""
        return self.mu(t) - self.mu(s)

    def segment_breaks(self, lo=0.0, hi=1.0):
        pts = {lo, hi} | {s for s in self.psi.breakpoints() if lo < s < hi}
        return sorted(pts)

    def lipschitz_constant(self, n=257):
        """Max Frobenius norm of ``gamma`` on a fine grid plus the knots."""
        ss = np.unique(np.concatenate([np.linspace(0, 1, n), self.psi.breakpoints()]))
        best = 0.0
        for s in ss:
            best = max(best, symmat.frobenius_norm(self.gamma(s)))
            if s > 0:
                # left derivative at knots
                eps = 1e-12
                best = max(best, symmat.frobenius_norm(self.gamma(max(s - eps, 0.0))))
        return best

    def integrate(self, fn, lo, hi, order=12):
        """Gauss-Legendre on each linear segment of ``Psi`` (exact for polynomial ``fn``)."""
        nodes, weights = np.polynomial.legendre.leggauss(order)
        total = 0.0
        pts = self.segment_breaks(lo, hi)
        for a, b in zip(pts, pts[1:]):
            if b <= a:
                continue
            half = 0.5 * (b - a)
            mid = 0.5 * (a + b)
            for t, w in zip(nodes, weights):
                total += w * half * fn(mid + half * t)
        return total
