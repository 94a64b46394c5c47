"""Hot kernels, compiled when available.

Set ``DIFFAUDIT_PURE_PYTHON=1`` to force the numpy fallback. ``BACKEND`` names
the implementation actually in use.
"""
import os

from . import _fallback

if os.environ.get("DIFFAUDIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

midranks = _impl.midranks
rank_sum = _impl.rank_sum
saffron_levels = _impl.saffron_levels
lloyd = _impl.lloyd

__all__ = ["BACKEND", "midranks", "rank_sum", "saffron_levels", "lloyd"]
