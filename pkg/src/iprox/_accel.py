"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of Python and
decorated with :func:`njit`.  When numba is missing the decorator is the
identity, so the kernels still run (slowly) as plain Python.  Whether the
solvers route through the compiled kernels at all is decided per call by
:func:`numba_enabled`, which reads the ``IPROX_USE_NUMBA`` environment flag.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "IPROX_USE_NUMBA"
_FALSY = {"0", "false", "no", "off"}


def numba_enabled(override=None):
    """Return True when the compiled kernel path should be used.

    ``override`` (a bool) wins over the environment; ``None`` defers to
    ``IPROX_USE_NUMBA`` (default on).
    """
    if override is not None:
        return bool(override) and HAVE_NUMBA
    flag = os.environ.get(ENV_FLAG, "1").strip().lower()
    return HAVE_NUMBA and flag not in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
