"""Kernel backend selection.

The compiled extension is preferred; the NumPy reference implementation is
the fallback.  Set ``COPT_WDC_PURE_PYTHON=1`` to force the fallback (used by
the benchmark and for debugging).
"""

import os

import numpy as np

from . import _reference

if os.environ.get("COPT_WDC_PURE_PYTHON", "") == "1":
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _reference
        BACKEND = "python"


def capped_simplex_rows(v, quotas, mask):
    v = np.ascontiguousarray(v, dtype=np.float64)
    quotas = np.ascontiguousarray(quotas, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    return _impl.capped_simplex_rows(v, quotas, mask)


def budget_box_projection(v, budget, lower, upper):
    v = np.ascontiguousarray(v, dtype=np.float64)
    return _impl.budget_box_projection(v, float(budget), float(lower), float(upper))


def lindley_waits(interarrivals, services):
    interarrivals = np.ascontiguousarray(interarrivals, dtype=np.float64)
    services = np.ascontiguousarray(services, dtype=np.float64)
    if interarrivals.shape != services.shape:
        raise ValueError("interarrivals and services must have equal length")
    return _impl.lindley_waits(interarrivals, services)


def use_backend(name):
    """Switch the active backend at runtime ('cython' or 'python')."""
    global _impl, BACKEND
    if name == "python":
        _impl = _reference
    elif name == "cython":
        from . import _speedups

        _impl = _speedups
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
