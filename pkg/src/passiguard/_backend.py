"""Kernel backend selection: numba-compiled hot loops or a pure-Python/NumPy fallback.

The environment variable ``PASSIGUARD_BACKEND`` picks the backend:

* ``auto`` (default) -- use numba if it imports, else fall back.
* ``numba``          -- require numba; raise if it is unavailable.
* ``python``         -- force the interpreted NumPy fallback.

Both backends execute the same source (the fallback is the undecorated
function), so a given backend is deterministic run-to-run.  The choice is
made once at import time; ``backend_name()`` reports which one is active.
"""

import os

_ENV_VAR = "PASSIGUARD_BACKEND"

_requested = os.environ.get(_ENV_VAR, "auto").strip().lower()
if _requested not in ("auto", "numba", "python"):
    raise RuntimeError(
        f"{_ENV_VAR}={_requested!r} not understood (expected auto, numba or python)"
    )

if _requested == "python":
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit as _njit

        _HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        _HAVE_NUMBA = False

_BACKEND = "numba" if _HAVE_NUMBA else "python"


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'python')."""
    return _BACKEND


def maybe_jit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if _HAVE_NUMBA:
        return _njit(cache=True)(func)
    return func
