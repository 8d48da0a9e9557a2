"""Compare the compiled line kernel with the numpy fallback.

Run from the repository root after an editable install:

    python3 benchmarks/bench_kernels.py

Times ``smooth_lines`` on line batches of several sizes for ``m`` in
{0, 0.5, 1} and reports the maximum difference between the backends; then
times one full D=2 solve under each backend in a fresh interpreter, since
the backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vecparisi import _kernels_py
from vecparisi.pde import gauss_hermite

try:
    from vecparisi import _kernels
except ImportError:
    _kernels = None

SOLVE = """
import time
from vecparisi import kernels
from vecparisi.config import RunConfig
from vecparisi.functional import tilt
from vecparisi.paths import DerivedPath
from vecparisi.pde import GridSpec, solve
cfg = RunConfig.from_dict({"preset": "potts2-mixed"})
derived = DerivedPath(cfg.model, cfg.psi)
base = tilt(cfg.base, cfg.model, cfg.psi.z)
start = time.perf_counter()
for _ in range(3):
    solve(base, derived, cfg.alpha, GridSpec(h=0.05))
print(kernels.BACKEND, (time.perf_counter() - start) / 3)
"""


def bench_lines(rows, n, m, repeat):
    rng = np.random.default_rng(0)
    f = rng.normal(size=(rows, n))
    nodes, weights = gauss_hermite(21)
    offsets = 0.8 * nodes / 0.05
    py = min(timeit.repeat(lambda: _kernels_py.smooth_lines(f, offsets, weights, m), number=1, repeat=repeat))
    out = {"rows": rows, "n": n, "m": m, "python_s": py}
    if _kernels is not None:
        cy = min(timeit.repeat(lambda: _kernels.smooth_lines(f, offsets, weights, m), number=1, repeat=repeat))
        diff = np.max(np.abs(_kernels.smooth_lines(f, offsets, weights, m) - _kernels_py.smooth_lines(f, offsets, weights, m)))
        out.update({"cython_s": cy, "speedup": py / cy, "max_diff": float(diff)})
    return out


def bench_solve():
    out = {}
    for label, env in (("cython", {}), ("python", {"VECPARISI_PURE_PYTHON": "1"})):
        res = subprocess.run([sys.executable, "-c", SOLVE], env={**os.environ, **env}, capture_output=True, text=True, check=True)
        backend, secs = res.stdout.split()
        out[label] = (backend, float(secs))
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled kernel not built; timing the numpy fallback only")
    print(f"{'rows':>6} {'n':>5} {'m':>4} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max diff':>9}")
    for rows, n in ((1, 241), (241, 241), (61 * 61, 61)):
        for m in (0.0, 0.5, 1.0):
            r = bench_lines(rows, n, m, args.repeat)
            cy = f"{1e3 * r['cython_s']:10.3f} {r['speedup']:8.2f} {r['max_diff']:9.1e}" if "cython_s" in r else ""
            print(f"{rows:>6} {n:>5} {m:>4} {1e3 * r['python_s']:10.3f} {cy}")
    print("\nfull D=2 solve (potts2-mixed, h = 0.05), seconds per solve:")
    for label, (backend, secs) in bench_solve().items():
        print(f"  requested {label:<7} ran {backend:<7} {secs:.3f}")


if __name__ == "__main__":
    main()
