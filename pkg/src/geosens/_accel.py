"""Optional numba acceleration.

Hot kernels are written once as plain Python/numpy loops and compiled with
``numba.njit`` when numba is importable.  Setting ``GEOSENS_DISABLE_NUMBA=1``
in the environment forces the pure-numpy fallbacks everywhere.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("GEOSENS_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched without numba."""
    if not HAVE_NUMBA:
        return func
    return _numba.njit(cache=True)(func)
