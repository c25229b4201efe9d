"""Kernel backend selection.

Hot numeric kernels exist in two interchangeable implementations:

* ``sldm._kernels_numba`` -- ``@njit``-compiled loops (fast path),
* ``sldm._kernels_numpy`` -- vectorized pure-numpy twins (fallback).

The active backend is chosen once at import time from the ``SLDM_BACKEND``
environment variable: ``numba``, ``numpy``, or unset/``auto`` (numba when
importable, numpy otherwise). Both modules expose the same function surface,
so callers do ``from .backend import kernels``.
"""

import os

ENV_VAR = "SLDM_BACKEND"


def available_backends():
    """Names of importable kernel backends, fastest first."""
    names = []
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    names.append("numpy")
    return names


def load_kernels(name):
    """Import and return the kernel module for an explicit backend name."""
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    raise ValueError(f"unknown kernel backend {name!r} (expected 'numba' or 'numpy')")


def _select():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if choice == "auto":
        return available_backends()[0]
    if choice in ("numba", "numpy"):
        if choice not in available_backends():
            raise ImportError(f"{ENV_VAR}={choice} requested but numba is not importable")
        return choice
    raise ValueError(f"{ENV_VAR}={choice!r} not understood (use 'numba', 'numpy' or 'auto')")


BACKEND = _select()
kernels = load_kernels(BACKEND)
