"""Covariance functions of Hadamard mixture type and their derived quantities.

For ``betas = {p: beta_p}`` the covariance is ``xi(a) = sum_p beta_p^2 sum_kk' a_kk'^p``.
With ``D == 1`` this is the scalar mixed p-spin ``xi(r) = sum_p beta_p^2 r^p``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import symmat


@dataclass(frozen=True)
class MixtureModel:
    dim: int
    betas: tuple  # ((p, beta_p), ...)
    kind: str = field(default="potts_hadamard")

    def __post_init__(self):
        if self.dim < 1 or self.dim > symmat.MAX_DIM:
            raise ValueError(f"dim must be in [1, {symmat.MAX_DIM}], got {self.dim}")
        betas = tuple(sorted((int(p), float(b)) for p, b in self.betas))
        if not betas:
            raise ValueError("at least one mixture coefficient is required")
        for p, b in betas:
            if p < 2:
                raise ValueError(f"mixture order p must be >= 2, got {p}")
            if b < 0:
                raise ValueError(f"beta_{p} must be non-negative, got {b}")
        if len({p for p, _ in betas}) != len(betas):
            raise ValueError("duplicate mixture order")
        if not any(b > 0 for _, b in betas):
            raise ValueError("at least one beta_p must be positive")
        if self.kind not in ("potts_hadamard", "scalar_mixed"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "scalar_mixed" and self.dim != 1:
            raise ValueError("scalar_mixed requires dim == 1")
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_config(cls, cfg):
        dim = int(cfg["dim"])
        kind = cfg.get("kind", "scalar_mixed" if dim == 1 else "potts_hadamard")
        return cls(dim, tuple((p, b) for p, b in cfg["betas"]), kind)

    def to_config(self):
        return {"dim": self.dim, "betas": [[p, b] for p, b in self.betas], "kind": self.kind}

    @property
    def max_order(self):
        return max(p for p, b in self.betas if b > 0)

    def is_quadratic(self):
        return all(b == 0 for p, b in self.betas if p >= 3)


def xi(model, a):
    a = symmat.as_sym(a, model.dim)
    return float(sum(b * b * np.sum(a**p) for p, b in model.betas))


def grad_xi(model, a):
    """Gradient ``sum_p p beta_p^2 a^{o(p-1)}`` (Hadamard powers)."""
    a = symmat.as_sym(a, model.dim)
    out = np.zeros_like(a)
    for p, b in model.betas:
        out += p * b * b * a ** (p - 1)
    return out


def hess_xi_dir(model, a, adot):
    """Directional derivative of ``grad_xi`` at ``a`` along ``adot``."""
    a = symmat.as_sym(a, model.dim)
    adot = symmat.as_sym(adot, model.dim)
    out = np.zeros_like(a)
    for p, b in model.betas:
        out += p * (p - 1) * b * b * a ** (p - 2) * adot
    return out


def theta(model, a):
    """``a . grad_xi(a) - xi(a)``."""
    a = symmat.as_sym(a, model.dim)
    return symmat.dot(a, grad_xi(model, a)) - xi(model, a)


def _random_psd(rng, dim, scale=1.0):
    g = rng.normal(size=(dim, dim)) * scale / np.sqrt(dim)
    return g @ g.T


def check_assumptions(model, samples=1000, seed=0, fd_step=1e-5):
    """Randomized falsification of monotonicity (H3) and of the strict
    positivity condition ``c . grad(b . grad_xi)(a) > 0``.

    A pass is evidence only. Witnesses of the first failure are returned.
    The directional derivative is taken by central differences of ``grad_xi``.
    """
    rng = np.random.default_rng(seed)
    d = model.dim
    report = {"samples": samples, "seed": seed}

    h3_fail = None
    for _ in range(samples):
        b = _random_psd(rng, d)
        a = b + _random_psd(rng, d)
        if xi(model, a) < xi(model, b) - 1e-12 or not symmat.loewner_leq(
            grad_xi(model, b), grad_xi(model, a), 1e-10
        ):
            h3_fail = {"a": symmat.to_json(a), "b": symmat.to_json(b)}
            break
    report["h3"] = {"passed": h3_fail is None, "witness": h3_fail}

    cond_fail = None
    min_val = np.inf
    for _ in range(samples):
        a = _random_psd(rng, d)
        b = _random_psd(rng, d)
        # Rank-one b probes kernel directions of the bilinear form.
        if rng.random() < 0.5:
            v = rng.normal(size=d)
            b = np.outer(v, v)
        c = _random_psd(rng, d) + 1e-3 * np.eye(d)
        val = (
            symmat.dot(b, grad_xi(model, a + fd_step * c))
            - symmat.dot(b, grad_xi(model, a - fd_step * c))
        ) / (2 * fd_step)
        min_val = min(min_val, val)
        if not val > 1e-9 * max(1.0, symmat.frobenius_norm(b) * symmat.frobenius_norm(c)):
            cond_fail = {
                "a": symmat.to_json(a),
                "b": symmat.to_json(b),
                "c": symmat.to_json(c),
                "value": val,
            }
            break
    report["cond_xi"] = {"passed": cond_fail is None, "witness": cond_fail, "min_value": min_val}
    report["passed"] = report["h3"]["passed"] and report["cond_xi"]["passed"]
    return report
