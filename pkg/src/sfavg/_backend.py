"""Kernel backend selection.

Two interchangeable kernel modules implement the numeric inner loops:

* ``_kernels_numba`` -- @njit-compiled, used by default when numba imports.
* ``_kernels_numpy`` -- pure numpy/python reference path.

``SFAVG_BACKEND`` in the environment picks one explicitly (``numba`` or
``numpy``); anything else (or unset) means auto. The module is loaded
lazily so thread configuration can happen before numba initializes.
"""

from __future__ import annotations

import importlib
import os

_BACKEND_ENV = "SFAVG_BACKEND"
_kernels = None
_kernels_name = None
_requested_threads = None


def backend_name() -> str:
    """Name of the kernel backend that get_kernels() will return."""
    forced = os.environ.get(_BACKEND_ENV, "auto").strip().lower()
    if forced == "numpy":
        return "numpy"
    if forced == "numba":
        return "numba"
    try:
        importlib.import_module("numba")
        return "numba"
    except ImportError:
        return "numpy"


def get_kernels():
    """Return the active kernel module, importing it on first use."""
    global _kernels, _kernels_name
    if _kernels is not None:
        return _kernels
    name = backend_name()
    if name == "numba" and _requested_threads is not None:
        # Honored only if numba has not initialized its thread pool yet.
        os.environ.setdefault("NUMBA_NUM_THREADS", str(_requested_threads))
    _kernels = importlib.import_module(f"sfavg._kernels_{name}")
    _kernels_name = name
    return _kernels


def active_backend() -> str:
    """Backend actually loaded (forces the lazy import)."""
    get_kernels()
    return _kernels_name


def set_threads(n: int) -> int:
    """Request n worker threads; returns the effective count.

    Results are independent of the thread count by construction (every
    Monte Carlo task derives its randomness from its own index), so this
    only affects wall clock. numba caps the count at its configured
    maximum, which on small machines may be below the request.
    """
    global _requested_threads
    n = max(1, int(n))
    _requested_threads = n
    if _kernels_name == "numba" or (_kernels is None and backend_name() == "numba"):
        try:
            import numba

            eff = min(n, numba.config.NUMBA_NUM_THREADS)
            numba.set_num_threads(eff)
            return eff
        except ImportError:
            return 1
    return 1
