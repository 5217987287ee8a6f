"""Backend switch for the hot kernels.

Every kernel in :mod:`planpace.kernels` exists twice: a loop version compiled
with numba and a vectorised numpy version. ``PLANPACE_NO_JIT=1`` (or a
missing numba install) selects the numpy versions at import time.
"""

from __future__ import annotations

import os

NO_JIT_ENV = "PLANPACE_NO_JIT"

_disabled = os.environ.get(NO_JIT_ENV, "").strip().lower() in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is optional
    _numba = None

HAVE_NUMBA = _numba is not None
JIT_ENABLED = HAVE_NUMBA and not _disabled


def njit(func):
    if not HAVE_NUMBA:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "numpy"
