"""Small symmetric matrices: Frobenius product, Loewner order, PSD square roots.

Matrices are plain ``(D, D)`` float arrays. Every function here symmetrizes
its inputs, so callers may pass arrays that are symmetric only up to rounding.
"""

import numpy as np

MAX_DIM = 8
PSD_TOL = 1e-12


class NotPsd(ValueError):
    """Raised when a matrix that must be positive semi-definite is not."""


def as_sym(a, dim=None):
    """Return ``a`` as a symmetric float array, checking its shape."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {a.shape[0]}")
    if a.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {a.shape[0]} exceeds MAX_DIM={MAX_DIM}")
    return 0.5 * (a + a.T)


def _check_pair(a, b):
    a, b = as_sym(a), as_sym(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def identity(dim):
    return np.eye(dim)


def ones(dim):
    return np.ones((dim, dim))


def dot(a, b):
    """Frobenius inner product ``sum_ij a_ij b_ij``."""
    a, b = _check_pair(a, b)
    return float(np.sum(a * b))


def frobenius_norm(a):
    a = as_sym(a)
    return float(np.sqrt(np.sum(a * a)))


def eigh(a):
    return np.linalg.eigh(as_sym(a))


def min_eig(a):
    return float(np.linalg.eigvalsh(as_sym(a))[0])


def is_psd(a, tol=PSD_TOL):
    if tol < 0:
        raise ValueError("tol must be non-negative")
    return min_eig(a) >= -tol


def is_pd(a, tol=0.0):
    return min_eig(a) > tol


def loewner_leq(a, b, tol=PSD_TOL):
    """True iff ``b - a`` is PSD up to ``tol``."""
    a, b = _check_pair(a, b)
    return is_psd(b - a, tol)


def sqrt_psd(a, tol=PSD_TOL):
    """Symmetric PSD square root; eigenvalues in ``[-tol, 0)`` are clamped to 0."""
    vals, vecs = eigh(a)
    if vals[0] < -tol:
        raise NotPsd(f"min eigenvalue {vals[0]:.3e} < -{tol:.1e}")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def psd_factor(a, tol=PSD_TOL, rank_tol=1e-12):
    """Rank-reduced factor ``F`` with ``F @ F.T == a``.

    Columns are ``sqrt(lambda_i) v_i`` for eigenvalues above ``rank_tol``;
    the null space of ``a`` is dropped, so a zero matrix yields shape ``(D, 0)``.
    """
    vals, vecs = eigh(a)
    if vals[0] < -tol:
        raise NotPsd(f"min eigenvalue {vals[0]:.3e} < -{tol:.1e}")
    keep = vals > rank_tol
    return vecs[:, keep] * np.sqrt(vals[keep])


def hadamard_power(a, k):
    return np.asarray(a, dtype=float) ** k


def to_json(a):
    """Row-major nested lists."""
    return [[float(v) for v in row] for row in as_sym(a)]


def from_json(rows, dim=None):
    return as_sym(np.array(rows, dtype=float), dim)
