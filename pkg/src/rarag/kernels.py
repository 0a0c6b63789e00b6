"""Backend selection for the hot kernels.

The compiled Cython module is used when it is importable; otherwise the
pure-Python implementation is loaded. Set ``RARAG_PURE_PYTHON=1`` to force
the fallback. Both backends expose the same functions and return
bit-identical results.

Codes convention used by every kernel: a response matrix is an ``int64``
array where ``-1`` is IDK and any non-negative integer identifies an answer
equivalence class within its row.
"""
from __future__ import annotations

import os

if os.environ.get("RARAG_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

IDK_CODE = -1

splitmix64 = _impl.splitmix64
hash64 = _impl.hash64
uniform_grid = _impl.uniform_grid
vote_rows = _impl.vote_rows
reliability_counts = _impl.reliability_counts
select_rows = _impl.select_rows

__all__ = [
    "BACKEND",
    "IDK_CODE",
    "hash64",
    "reliability_counts",
    "select_rows",
    "splitmix64",
    "uniform_grid",
    "vote_rows",
]
