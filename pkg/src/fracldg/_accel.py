"""numba dispatch.

Set ``FRACLDG_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when
numba is importable.  The flag is read once at import time.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("FRACLDG_DISABLE_NUMBA", "").strip().lower() not in (
    "",
    "0",
    "false",
    "no",
)

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)

    def wrapper(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrapper


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
