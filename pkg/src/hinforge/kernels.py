"""Kernel dispatch: compiled ``_core`` when importable, else ``_pycore``.

Set ``HINFORGE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pycore

BACKEND = "python"
if os.environ.get("HINFORGE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pycore
else:
    _impl = _pycore

count_walks = _impl.count_walks
shortest_path_scores = _impl.shortest_path_scores

__all__ = ["BACKEND", "count_walks", "shortest_path_scores"]
