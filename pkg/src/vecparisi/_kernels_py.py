"""Pure-numpy line smoothing kernel (fallback for the compiled ``_kernels``)."""

import numpy as np
from scipy import sparse


def _keys(t):
    """Keys cubic convolution weights (a = -1/2) for nodes j-1, j, j+1, j+2."""
    t2 = t * t
    t3 = t2 * t
    return (
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    )


def stencil(n, pos):
    """Four (index, weight) pairs per fractional index in ``pos``.

    Inside ``[0, n-1]`` this is the Keys cubic with ghost nodes at ``-1`` and
    ``n`` taken as linear extensions of the edge pairs; outside, the
    interpolant is extended linearly from the two edge nodes.
    Returns integer ``idx`` and float ``wt`` arrays of shape ``pos.shape + (4,)``.
    """
    pos = np.asarray(pos, dtype=float)
    shape = pos.shape
    p = pos.ravel()
    idx = np.zeros((p.size, 4), dtype=np.intp)
    wt = np.zeros((p.size, 4))
    if n == 1:
        wt[:, 0] = 1.0
        return idx.reshape(shape + (4,)), wt.reshape(shape + (4,))

    left = p < 0
    right = p > n - 1
    inside = ~(left | right)

    pl = p[left]
    idx[left, 0], wt[left, 0] = 0, 1.0 - pl
    idx[left, 1], wt[left, 1] = 1, pl

    pr = p[right] - (n - 1)
    idx[right, 0], wt[right, 0] = n - 1, 1.0 + pr
    idx[right, 1], wt[right, 1] = n - 2, -pr

    pi = p[inside]
    j = np.minimum(np.floor(pi).astype(np.intp), n - 2)
    w0, w1, w2, w3 = _keys(pi - j)
    w1 = w1.copy()
    w2 = w2.copy()
    lo = j == 0
    hi = j + 2 > n - 1
    # ghost -1 = 2 f_0 - f_1
    w1[lo] += 2.0 * w0[lo]
    w2[lo] -= w0[lo]
    w0 = np.where(lo, 0.0, w0)
    # ghost n = 2 f_{n-1} - f_{n-2}
    w2[hi] += 2.0 * w3[hi]
    w1[hi] -= w3[hi]
    w3 = np.where(hi, 0.0, w3)
    idx[inside] = np.stack(
        [np.maximum(j - 1, 0), j, j + 1, np.minimum(j + 2, n - 1)], axis=1
    )
    wt[inside] = np.stack([w0, w1, w2, w3], axis=1)
    return idx.reshape(shape + (4,)), wt.reshape(shape + (4,))


def interp_matrix(n, pos):
    """Sparse ``(len(pos), n)`` matrix evaluating the cubic interpolant at
    fractional indices ``pos`` (see ``stencil``)."""
    pos = np.asarray(pos, dtype=float).ravel()
    idx, wt = stencil(n, pos)
    rows = np.repeat(np.arange(pos.size), 4)
    return sparse.csr_matrix((wt.ravel(), (rows, idx.ravel())), shape=(pos.size, n))


SMALL_M = 1e-2


def log_mean_exp(v, weights, m, axis=-1):
    """``(1/m) log sum_k w_k exp(m v_k)`` with ``sum w = 1``; ``sum w v`` at ``m == 0``.

    For small ``m`` the expm1/log1p form keeps full relative accuracy; otherwise
    the weights enter the shift, so a maximum sitting on a node of negligible
    weight cannot cancel against the rest of the sum.
    """
    if m == 0.0:
        return np.tensordot(v, weights, axes=([axis], [0]))
    if abs(m) < SMALL_M:
        c = v.max(axis=axis, keepdims=True) if m > 0 else v.min(axis=axis, keepdims=True)
        s = np.tensordot(np.expm1(m * (v - c)), weights, axes=([axis], [0]))
        return np.squeeze(c, axis=axis) + np.log1p(s) / m
    shape = [1] * v.ndim
    shape[axis] = -1
    t = m * v + np.log(np.maximum(weights, 1e-300)).reshape(shape)
    c = t.max(axis=axis, keepdims=True)
    s = np.exp(t - c).sum(axis=axis)
    return (np.squeeze(c, axis=axis) + np.log(s)) / m


def smooth_lines(f, offsets, weights, m):
    """For each row ``f[r]`` on an integer-index grid, return
    ``(1/m) log sum_k w_k exp(m f_r(i + offsets[k]))`` for every index ``i``.
    """
    f = np.ascontiguousarray(f, dtype=float)
    lines, n = f.shape
    offsets = np.asarray(offsets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    pos = (np.arange(n)[:, None] + offsets[None, :]).ravel()
    W = interp_matrix(n, pos)
    v = (W @ f.T).T.reshape(lines, n, offsets.size)
    return log_mean_exp(v, weights, float(m), axis=-1)
