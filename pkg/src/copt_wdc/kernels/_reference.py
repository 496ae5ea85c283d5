"""Pure-NumPy implementations of the hot numeric kernels.

These mirror the compiled versions in ``_speedups.pyx`` exactly (same
bisection schedule, same tie handling) so the two backends are
interchangeable bit-for-bit up to floating-point associativity.
"""

import numpy as np

BISECT_ITERS = 60


def capped_simplex_rows(v, quotas, mask):
    """Project each row of ``v`` onto its capped-simplex slice.

    Row i is mapped to ``argmin ||x - v_i||`` subject to
    ``sum(x[mask_i]) == quotas[i]``, ``0 <= x <= 1`` and ``x == 0`` off the
    mask.  The shift multiplier is found by bisection; the bracket
    ``[min(v)-1, max(v)]`` provably contains the root.
    """
    v = np.asarray(v, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    quotas = np.asarray(quotas, dtype=np.float64)
    out = np.zeros_like(v)
    masked = np.where(mask, v, np.nan)
    lo = np.nanmin(masked, axis=1) - 1.0
    hi = np.nanmax(masked, axis=1)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        total = np.sum(
            np.clip(np.where(mask, v - mid[:, None], 0.0), 0.0, 1.0), axis=1
        )
        take = total >= quotas
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    tau = 0.5 * (lo + hi)
    np.clip(v - tau[:, None], 0.0, 1.0, out=out)
    out[~mask] = 0.0
    return out


def budget_box_projection(v, budget, lower, upper):
    """Project ``v`` onto ``{x : sum(x) <= budget, lower <= x <= upper}``.

    If the box clamp already satisfies the budget it is returned directly;
    otherwise the budget binds and the shift multiplier is bisected.
    """
    v = np.asarray(v, dtype=np.float64)
    clamped = np.clip(v, lower, upper)
    if clamped.sum() <= budget:
        return clamped
    lo = 0.0
    hi = float(np.max(v)) - lower
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        total = np.clip(v - mid, lower, upper).sum()
        if total >= budget:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), lower, upper)


def lindley_waits(interarrivals, services):
    """FIFO waiting times of a single-server queue.

    ``interarrivals[n]`` is the gap between arrivals n-1 and n (entry 0 is
    ignored), ``services[n]`` the service requirement of arrival n.  Returns
    the time each arrival spends in queue, excluding its own service.
    """
    interarrivals = np.asarray(interarrivals, dtype=np.float64)
    services = np.asarray(services, dtype=np.float64)
    n = services.shape[0]
    waits = np.empty(n, dtype=np.float64)
    w = 0.0
    waits[0] = 0.0
    for i in range(1, n):
        w = w + services[i - 1] - interarrivals[i]
        if w < 0.0:
            w = 0.0
        waits[i] = w
    return waits
