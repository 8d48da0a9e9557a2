"""Functions on a rotated tensor grid over ``[-L, L]^D``.

A ``GridFunction`` stores values at the nodes ``x = R y`` where ``y`` runs
over the tensor grid with spacing ``h`` and ``R`` is an orthogonal matrix
whose columns are the grid axes. Evaluation off the nodes is tensor-product
cubic interpolation, extended linearly outside the box.
"""

import numpy as np

from ._kernels_py import stencil


def axis_coords(n, h):
    half = (n - 1) / 2
    return (np.arange(n) - half) * h


def _interp(values, frac):
    """Tensor cubic interpolation of ``values`` at fractional indices ``frac`` (N, D)."""
    d = values.ndim
    npts = frac.shape[0]
    index = []
    weight = np.ones((npts,) + (1,) * d)
    for a in range(d):
        idx, wt = stencil(values.shape[a], frac[:, a])
        shape = [npts] + [1] * d
        shape[a + 1] = 4
        index.append(idx.reshape(shape))
        weight = weight * wt.reshape(shape)
    return (values[tuple(index)] * weight).reshape(npts, -1).sum(axis=1)


def _diff(values, axis, h):
    """First derivative along ``axis``: fourth-order central differences in the
    interior, second-order at the two nodes next to each edge."""
    out = np.gradient(values, h, axis=axis, edge_order=2)
    n = values.shape[axis]
    if n >= 5:
        v = np.moveaxis(values, axis, 0)
        o = np.moveaxis(out, axis, 0)
        o[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    return out


class GridFunction:
    def __init__(self, values, h, rot=None):
        values = np.asarray(values, dtype=float)
        d = values.ndim
        if len(set(values.shape)) != 1:
            raise ValueError("grid must have the same number of nodes on every axis")
        self.values = values
        self.h = float(h)
        self.rot = np.eye(d) if rot is None else np.asarray(rot, dtype=float)
        self._grad = None
        self._hess = None
        self._third = None

    @classmethod
    def from_callable(cls, fn, dim, n, h, rot=None):
        """Tabulate ``fn`` (which maps an ``(N, D)`` array of points to ``(N,)``)."""
        g = cls(np.zeros((n,) * dim), h, rot)
        g.values = np.asarray(fn(g.points()), dtype=float).reshape((n,) * dim)
        return g

    @property
    def dim(self):
        return self.values.ndim

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def half_width(self):
        return (self.n - 1) / 2 * self.h

    def coords(self):
        return axis_coords(self.n, self.h)

    def points(self):
        """All node locations in the original coordinates, C order, shape ``(n^D, D)``."""
        c = self.coords()
        mesh = np.meshgrid(*([c] * self.dim), indexing="ij")
        y = np.stack([m.ravel() for m in mesh], axis=1)
        return y @ self.rot.T

    def with_values(self, values):
        return GridFunction(values, self.h, self.rot)

    def _frac(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        y = x @ self.rot
        return (y + self.half_width) / self.h

    def inside(self, x, margin=0.0):
        """Mask of points whose rotated coordinates lie within the box minus ``margin``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x @ self.rot
        return np.all(np.abs(y) <= self.half_width - margin + 1e-12, axis=1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = _interp(self.values, self._frac(x))
        return float(out[0]) if single else out

    def grad_grids(self):
        """Partial derivatives along the grid axes, shape ``(D,) + grid``."""
        if self._grad is None:
            self._grad = np.stack([_diff(self.values, a, self.h) for a in range(self.dim)])
        return self._grad

    def hess_grids(self):
        """Second derivatives along the grid axes, shape ``(D, D) + grid``."""
        if self._hess is None:
            g = self.grad_grids()
            d = self.dim
            hs = np.empty((d, d) + self.values.shape)
            for a in range(d):
                for b in range(a, d):
                    hs[a, b] = _diff(g[a], b, self.h)
                    if b != a:
                        hs[a, b] = 0.5 * (hs[a, b] + _diff(g[b], a, self.h))
                        hs[b, a] = hs[a, b]
            self._hess = hs
        return self._hess

    def third_grids(self):
        """Third derivatives along the grid axes, shape ``(D, D, D) + grid``."""
        if self._third is None:
            hs = self.hess_grids()
            d = self.dim
            out = np.empty((d, d, d) + self.values.shape)
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        out[a, b, c] = _diff(hs[a, b], c, self.h)
            self._third = out
        return self._third

    def grad(self, x):
        """Gradient in the original coordinates at points ``x`` (N, D) -> (N, D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        frac = self._frac(x)
        gy = np.stack([_interp(g, frac) for g in self.grad_grids()], axis=1)
        out = gy @ self.rot.T
        return out[0] if single else out

    def hess(self, x):
        """Hessian in the original coordinates, (N, D, D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        frac = self._frac(x)
        d = self.dim
        hs = self.hess_grids()
        hy = np.empty((frac.shape[0], d, d))
        for a in range(d):
            for b in range(a, d):
                hy[:, a, b] = _interp(hs[a, b], frac)
                hy[:, b, a] = hy[:, a, b]
        out = np.einsum("ia,nab,jb->nij", self.rot, hy, self.rot)
        return out[0] if single else out

    def third(self, x):
        """Third derivative tensor in the original coordinates, (N, D, D, D)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        frac = self._frac(x)
        d = self.dim
        ts = self.third_grids()
        ty = np.empty((frac.shape[0], d, d, d))
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    ty[:, a, b, c] = _interp(ts[a, b, c], frac)
        r = self.rot
        out = np.einsum("ia,jb,kc,nabc->nijk", r, r, r, ty)
        return out[0] if single else out

    def resample(self, rot):
        """The same function tabulated on the grid rotated by ``rot``."""
        target = GridFunction(np.zeros_like(self.values), self.h, rot)
        target.values = self(target.points()).reshape(self.values.shape)
        return target
