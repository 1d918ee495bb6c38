"""Numba switch.

Hot loops live in :mod:`mfg_broker._kernels` in two flavours: an ``@njit``
version and a pure-numpy version.  ``MFG_NO_NUMBA=1`` (or a missing numba)
selects the numpy path.  ``MFG_THREADS`` caps the numba worker count; results
never depend on it because every parallel loop writes disjoint outputs and
reductions happen afterwards in a fixed order.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MFG_NO_NUMBA", "0") not in ("1", "true", "yes")


def _noop(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


if USE_NUMBA:
    if not os.environ.get("NUMBA_THREADING_LAYER"):
        # the bundled TBB is often too old; workqueue is always available
        numba.config.THREADING_LAYER = "workqueue"
    njit = numba.njit
    prange = numba.prange
else:
    njit = _noop
    prange = range


def configure_threads():
    """Apply ``MFG_THREADS`` to numba's thread pool (no-op without numba)."""
    if not USE_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    raw = os.environ.get("MFG_THREADS")
    if raw:
        try:
            limit = max(1, min(int(raw), limit))
        except ValueError:
            pass
    numba.set_num_threads(limit)
    return limit


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
