"""Nested Monte-Carlo evaluation of the cascade recursion

    X_K = phi(x + sum_l sqrt(mu(q_l) - mu(q_{l-1})) g_l),
    X_{l-1} = (1/m_{l-1}) log E_{g_l} exp(m_{l-1} X_l),

whose root ``X_0`` equals ``Phi(0, x)``. Expectations at each level are
replaced by averages over ``n_l`` children, so the estimator shares no code
with the grid solver beyond ``phi`` and ``mu``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import symmat

LEAF_BUDGET = 1 << 18
CHUNK_LEAVES = 1 << 20


def default_widths(alpha, derived, budget=LEAF_BUDGET):
    """Levels with zero covariance get width 1. Among the rest, levels folded
    with ``m = 0`` are plain averages and get 16 children (replications carry
    the rest of the variance); levels folded with ``m > 0`` share the
    remaining leaf budget equally, since their finite-width bias is what
    limits accuracy."""
    widths = []
    nested = []
    for l in range(1, len(alpha.qs)):
        cov = derived.mu(alpha.qs[l]) - derived.mu(alpha.qs[l - 1])
        if np.linalg.eigvalsh(symmat.as_sym(cov))[-1] <= 1e-14:
            widths.append(1)
        elif alpha.ms[l - 1] == 0.0:
            widths.append(16)
        else:
            widths.append(None)
            nested.append(l - 1)
    used = int(np.prod([w for w in widths if w is not None])) if widths else 1
    if nested:
        per = max(2, int((budget / used) ** (1.0 / len(nested))))
        widths = [per if w is None else w for w in widths]
    return tuple(widths)


@dataclass
class NestedSampler:
    alpha: object
    derived: object
    base: object
    widths: tuple = None
    seed: int = 0
    factors: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.widths is None:
            self.widths = default_widths(self.alpha, self.derived)
        self.widths = tuple(int(w) for w in self.widths)
        k = len(self.alpha.qs) - 1
        if len(self.widths) != k:
            raise ValueError(f"need {k} widths, got {len(self.widths)}")
        for l, w in enumerate(self.widths):
            if w < 1 or (self.alpha.ms[l] > 0 and w < 2 and self._has_noise(l + 1)):
                raise ValueError("levels folded with m > 0 need width >= 2")
        self.factors = [
            symmat.psd_factor(
                self.derived.mu(self.alpha.qs[l]) - self.derived.mu(self.alpha.qs[l - 1]),
                tol=1e-10,
            )
            for l in range(1, k + 1)
        ]

    def _has_noise(self, l):
        cov = self.derived.mu(self.alpha.qs[l]) - self.derived.mu(self.alpha.qs[l - 1])
        return np.linalg.eigvalsh(symmat.as_sym(cov))[-1] > 1e-14

    def _fold(self, vals, m, axis):
        if m == 0.0:
            return vals.mean(axis=axis)
        n = vals.shape[axis]
        return (logsumexp(m * vals, axis=axis) - np.log(n)) / m

    def _tree(self, rng, x, level):
        """Values ``X_{level-1}`` for a batch of start points ``x`` (B, D)."""
        k = len(self.widths)
        if level > k:
            return self.base.phi(x)
        n = self.widths[level - 1]
        f = self.factors[level - 1]
        b = x.shape[0]
        pts = np.repeat(x, n, axis=0)
        if f.shape[1]:
            pts = pts + rng.standard_normal((b * n, f.shape[1])) @ f.T
        sub = int(np.prod(self.widths[level:])) if level < k else 1
        if b * n * sub > CHUNK_LEAVES and b > 1:
            vals = np.concatenate(
                [self._tree(rng, pts[i * n : (i + 1) * n], level + 1) for i in range(b)]
            )
        else:
            vals = self._tree(rng, pts, level + 1)
        return self._fold(vals.reshape(b, n), self.alpha.ms[level - 1], axis=1)

    def one_estimate(self, rng, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return float(self._tree(rng, x, 1)[0])


def estimate_phi0(sampler, x, replications=32):
    """Mean and standard error of ``replications`` independent nested estimates.

    Each replication draws from its own stream spawned from ``sampler.seed``.
    """
    if replications < 2:
        raise ValueError("replications must be >= 2")
    streams = np.random.SeedSequence(sampler.seed).spawn(replications)
    est = np.array(
        [sampler.one_estimate(np.random.default_rng(ss), x) for ss in streams]
    )
    return {
        "mean": float(est.mean()),
        "stderr": float(est.std(ddof=1) / np.sqrt(replications)),
        "widths": list(sampler.widths),
        "seed": int(sampler.seed),
        "replications": int(replications),
    }
