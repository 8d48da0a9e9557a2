"""Selects the compiled line kernel when available.

Set ``VECPARISI_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
smooth_lines = _kernels_py.smooth_lines

if not os.environ.get("VECPARISI_PURE_PYTHON"):
    try:
        from ._kernels import smooth_lines  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

__all__ = ["BACKEND", "smooth_lines"]
