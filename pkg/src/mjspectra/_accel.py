"""Kernel backend selection.

Hot loops are written once as plain Python over numpy arrays and compiled
with ``numba.njit`` when available.  Setting ``MJSPECTRA_DISABLE_NUMBA=1``
(or running without numba installed) leaves them as ordinary Python, which
is slower but numerically identical up to floating-point reassociation.
"""
import os

_DISABLED = os.environ.get("MJSPECTRA_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba as _numba
except ImportError:  # pragma: no cover - exercised by the fallback benchmark
    _numba = None

USING_NUMBA = _numba is not None
BACKEND = "numba" if USING_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``, or a no-op decorator in fallback mode."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)
