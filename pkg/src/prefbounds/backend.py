"""Backend selection for the hot numeric kernels.

The kernels in :mod:`prefbounds.kernels` are written once, in a
loop-over-small-dimensions style that both NumPy and numba handle well,
and compiled with ``@njit`` when numba is available.  Setting the
environment variable ``PREFBOUNDS_NO_NUMBA=1`` forces the pure-NumPy
fallback path (useful for debugging and for the kernel benchmark).
"""

import os

_flag = os.environ.get("PREFBOUNDS_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in ("1", "true", "yes")

HAVE_NUMBA = False
if not NUMBA_DISABLED:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def active_backend() -> str:
    """Name of the backend the dispatchers will use ('numba' or 'numpy')."""
    return "numba" if USE_NUMBA else "numpy"
