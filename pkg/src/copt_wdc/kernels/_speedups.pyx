# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numeric kernels.

Semantics match ``_reference`` exactly: same bisection iteration count,
same bracket construction, same tie handling.
"""

import numpy as np

cdef int BISECT_ITERS = 60


cdef inline double _clip01(double x) nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def capped_simplex_rows(double[:, ::1] v, double[::1] quotas, unsigned char[:, ::1] mask):
    cdef Py_ssize_t rows = v.shape[0]
    cdef Py_ssize_t cols = v.shape[1]
    out_arr = np.zeros((rows, cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, it
    cdef double lo, hi, mid, total, vmin, vmax, x
    with nogil:
        for i in range(rows):
            vmin = 1e300
            vmax = -1e300
            for j in range(cols):
                if mask[i, j]:
                    if v[i, j] < vmin:
                        vmin = v[i, j]
                    if v[i, j] > vmax:
                        vmax = v[i, j]
            lo = vmin - 1.0
            hi = vmax
            for it in range(BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                total = 0.0
                for j in range(cols):
                    if mask[i, j]:
                        total += _clip01(v[i, j] - mid)
                if total >= quotas[i]:
                    lo = mid
                else:
                    hi = mid
            mid = 0.5 * (lo + hi)
            for j in range(cols):
                if mask[i, j]:
                    out[i, j] = _clip01(v[i, j] - mid)
    return out_arr


def budget_box_projection(double[::1] v, double budget, double lower, double upper):
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, it
    cdef double total = 0.0
    cdef double lo, hi, mid, x, vmax
    with nogil:
        vmax = -1e300
        for i in range(n):
            x = v[i]
            if x < lower:
                x = lower
            elif x > upper:
                x = upper
            out[i] = x
            total += x
            if v[i] > vmax:
                vmax = v[i]
        if total > budget:
            lo = 0.0
            hi = vmax - lower
            for it in range(BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                total = 0.0
                for i in range(n):
                    x = v[i] - mid
                    if x < lower:
                        x = lower
                    elif x > upper:
                        x = upper
                    total += x
                if total >= budget:
                    lo = mid
                else:
                    hi = mid
            mid = 0.5 * (lo + hi)
            for i in range(n):
                x = v[i] - mid
                if x < lower:
                    x = lower
                elif x > upper:
                    x = upper
                out[i] = x
    return out_arr


def lindley_waits(double[::1] interarrivals, double[::1] services):
    cdef Py_ssize_t n = services.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double w = 0.0
    with nogil:
        out[0] = 0.0
        for i in range(1, n):
            w = w + services[i - 1] - interarrivals[i]
            if w < 0.0:
                w = 0.0
            out[i] = w
    return out_arr
