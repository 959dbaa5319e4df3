"""Kernel acceleration switch.

Hot kernels (z-buffer splatting, exact distance transform) exist twice: a
numba ``@njit`` version and a pure-numpy fallback. The active path is chosen
once at import time:

* ``FILAMENTQC_NO_NUMBA=1`` forces the numpy fallback,
* ``NUMBA_DISABLE_JIT`` (numba's own switch) does the same,
* if numba is not importable the fallback is used silently.

Both paths are bit-for-bit equivalent; ``benchmarks/bench_kernels.py``
compares their throughput.
"""

from __future__ import annotations

import os

_TRUTHY = ("1", "true", "yes", "on")


def _env_disabled() -> bool:
    if os.environ.get("FILAMENTQC_NO_NUMBA", "").strip().lower() in _TRUTHY:
        return True
    if os.environ.get("NUMBA_DISABLE_JIT", "").strip() not in ("", "0"):
        return True
    return False


def _probe_numba() -> bool:
    if _env_disabled():
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _probe_numba()


def njit(*args, **kwargs):
    """numba.njit when acceleration is on, identity decorator otherwise."""
    if NUMBA_ENABLED:
        import numba

        return numba.njit(*args, **kwargs)
    if args and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap
