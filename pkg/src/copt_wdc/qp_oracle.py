"""Brute-force quadratic-program references for the projection operators.

Each oracle enumerates every lower/free/upper activity pattern of the box
constraints (3^d patterns, d <= ~10), builds the stationary candidate for
the pattern, keeps the primal-feasible ones, and returns the candidate with
the smallest distance to the query point.  No shift-multiplier search is
involved, so these are independent of the bisection implementations they
are used to check.
"""

from __future__ import annotations

import numpy as np

_LOWER, _FREE, _UPPER = 0, 1, 2


def _patterns(d: int) -> np.ndarray:
    idx = np.arange(3**d)
    cols = []
    for j in range(d):
        cols.append((idx // 3**j) % 3)
    return np.stack(cols, axis=1).astype(np.int8)


def capped_simplex_qp(v, quota, support=None, tol=1e-9) -> np.ndarray:
    """Reference solution of min ||x-v||^2 over the capped simplex."""
    v = np.asarray(v, dtype=np.float64)
    if support is None:
        support = np.ones(v.shape, dtype=bool)
    support = np.asarray(support, dtype=bool)
    vs = v[support]
    d = vs.size
    if quota > d:
        raise ValueError("quota exceeds support size")
    pats = _patterns(d)
    free = pats == _FREE
    upper = pats == _UPPER
    nf = free.sum(axis=1)
    nu = upper.sum(axis=1)
    free_sum = free @ vs
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = (free_sum - (quota - nu)) / nf
    x = np.where(upper, 1.0, 0.0) + np.where(free, vs[None, :] - tau[:, None], 0.0)
    sums = x.sum(axis=1)
    ok = np.all((x >= -tol) & (x <= 1 + tol), axis=1)
    ok &= np.where(nf > 0, True, np.abs(sums - quota) <= tol)
    ok &= np.isfinite(x).all(axis=1)
    if not ok.any():
        raise ArithmeticError("no feasible activity pattern found")
    obj = np.einsum("ij,ij->i", x - vs[None, :], x - vs[None, :])
    obj[~ok] = np.inf
    best = np.clip(x[int(np.argmin(obj))], 0.0, 1.0)
    out = np.zeros_like(v)
    out[support] = best
    return out


def power_qp(v, budget, p_min, p_max, tol=1e-9) -> np.ndarray:
    """Reference solution of min ||x-v||^2 over the budgeted box."""
    v = np.asarray(v, dtype=np.float64)
    d = v.size
    candidates = []
    clipped = np.clip(v, p_min, p_max)
    if clipped.sum() <= budget + tol:
        candidates.append(clipped)
    pats = _patterns(d)
    free = pats == _FREE
    upper = pats == _UPPER
    lower = pats == _LOWER
    nf = free.sum(axis=1)
    nu = upper.sum(axis=1)
    nl = lower.sum(axis=1)
    free_sum = free @ v
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = (free_sum + nu * p_max + nl * p_min - budget) / nf
    x = (
        np.where(upper, p_max, 0.0)
        + np.where(lower, p_min, 0.0)
        + np.where(free, v[None, :] - tau[:, None], 0.0)
    )
    sums = x.sum(axis=1)
    ok = np.all((x >= p_min - tol) & (x <= p_max + tol), axis=1)
    ok &= sums <= budget + tol
    ok &= np.isfinite(x).all(axis=1)
    for row in x[ok]:
        candidates.append(np.clip(row, p_min, p_max))
    if not candidates:
        raise ArithmeticError("no feasible activity pattern found")
    stacked = np.stack(candidates)
    obj = np.einsum("ij,ij->i", stacked - v[None, :], stacked - v[None, :])
    return stacked[int(np.argmin(obj))]
