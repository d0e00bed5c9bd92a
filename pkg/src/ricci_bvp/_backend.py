"""Backend selection for the compiled kernels.

The hot loops in :mod:`ricci_bvp.kernels` exist twice: as numba ``@njit``
loops and as vectorised numpy code.  Numba is used when it imports and the
environment variable ``RICCI_BVP_DISABLE_NUMBA`` is unset (or ``0``).
"""
import os

_flag = os.environ.get("RICCI_BVP_DISABLE_NUMBA", "0").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    if DISABLED_BY_ENV:
        raise ImportError("disabled by RICCI_BVP_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """No-op stand-in for ``numba.njit``."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = HAVE_NUMBA


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
