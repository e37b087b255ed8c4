"""Optional numba acceleration for the hot loops.

Kernels decorated with :func:`njit` are compiled by numba when it is importable
and ``DALGAME_DISABLE_NUMBA`` is unset (or ``0``).  Otherwise callers fall back
to the pure-numpy paths, which compute the same recurrences with array ops.
"""

import os

_FLAG = os.environ.get("DALGAME_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_ENABLED = numba is not None and not DISABLED_BY_ENV


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
