"""Numba switch.

Set ``POLYSCORE_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. on
platforms without an LLVM build or when debugging. The choice is made once,
at import time.
"""

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

ENV_FLAG = "POLYSCORE_DISABLE_NUMBA"

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get(ENV_FLAG, "").strip().lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def njit(func):
    """Compile ``func`` in nopython mode when numba is importable.

    Compilation is lazy, so merely importing a module that decorates a
    kernel costs nothing when the numpy path is selected.
    """
    if not HAVE_NUMBA:
        return func
    return _numba.njit(cache=True, nogil=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
