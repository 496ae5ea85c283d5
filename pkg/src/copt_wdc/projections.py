"""Exact Euclidean projections for the scheduling polytope and power budget.

The feasible set is a product: each file's policy row lives on a capped
simplex (entries in [0, 1], supported entries summing to the file's quota),
and the power block lives in a box intersected with a total-budget
halfspace.  Both projections reduce to a scalar shift multiplier found by
bisection, which handles the caps and the support mask uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, InfeasibleQuotaError


@dataclass(frozen=True)
class PolicySupport:
    """Support sets and quotas for every file's policy row.

    ``mask[i, j]`` is True when server j stores a chunk of file i;
    ``quotas[i]`` is the number of servers each request for file i needs.
    """

    mask: np.ndarray  # (N, M) bool
    quotas: np.ndarray  # (N,) float

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        quotas = np.asarray(self.quotas, dtype=np.float64)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "quotas", quotas)
        if mask.ndim != 2 or quotas.shape != (mask.shape[0],):
            raise ConfigurationError("mask must be (N, M) with one quota per row")
        counts = mask.sum(axis=1)
        if np.any(quotas > counts):
            bad = int(np.argmax(quotas > counts))
            raise InfeasibleQuotaError(
                f"file {bad}: quota {quotas[bad]} exceeds support size {counts[bad]}"
            )
        if np.any(quotas <= 0):
            raise ConfigurationError("quotas must be positive")


def project_capped_simplex(v, quota, support=None) -> np.ndarray:
    """Project onto {x : sum(x[support]) == quota, 0 <= x <= 1, 0 off support}."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("v must be a vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values")
    if support is None:
        support = np.ones(v.shape, dtype=bool)
    support = np.asarray(support, dtype=bool)
    size = int(support.sum())
    if quota > size:
        raise InfeasibleQuotaError(f"quota {quota} exceeds support size {size}")
    out = kernels.capped_simplex_rows(
        v[None, :], np.array([float(quota)]), support[None, :]
    )[0]
    total = out[support].sum()
    if abs(total - quota) > 1e-10:
        raise ArithmeticError(f"bisection failed: |sum - quota| = {abs(total - quota)}")
    return out


def project_power(v, budget, p_min, p_max) -> np.ndarray:
    """Project onto {p : sum(p) <= budget, p_min <= p <= p_max}."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project non-finite values")
    if p_min >= p_max:
        raise ConfigurationError("p_min must be strictly below p_max")
    if v.size * p_min > budget + 1e-12:
        raise ConfigurationError(
            f"box floor infeasible: {v.size} * {p_min} exceeds budget {budget}"
        )
    return kernels.budget_box_projection(v, budget, p_min, p_max)


def prox_policy_power(x, support: PolicySupport, budget, p_min, p_max, step=1.0):
    """Proximal map of the feasible-set indicator on a flat decision vector.

    Layout: the first M entries are powers, the remaining N*M entries the
    policy matrix in row-major order.  ``step`` is accepted for interface
    compatibility and ignored (indicator prox is step independent).
    """
    del step
    x = np.asarray(x, dtype=np.float64)
    n_files, n_servers = support.mask.shape
    if x.shape != (n_servers + n_files * n_servers,):
        raise ValueError(
            f"expected flat vector of length {n_servers + n_files * n_servers}"
        )
    power = project_power(x[:n_servers], budget, p_min, p_max)
    rows = x[n_servers:].reshape(n_files, n_servers)
    policy = kernels.capped_simplex_rows(rows, support.quotas, support.mask)
    return np.concatenate([power, policy.ravel()])


def policy_feasible(policy, support: PolicySupport, tol=1e-10) -> bool:
    """Check the scheduling constraints: row sums, box, zero off support."""
    policy = np.asarray(policy, dtype=np.float64)
    if np.any(policy < -tol) or np.any(policy > 1 + tol):
        return False
    if np.any(np.abs(policy[~support.mask]) > tol):
        return False
    sums = np.where(support.mask, policy, 0.0).sum(axis=1)
    return bool(np.all(np.abs(sums - support.quotas) <= tol))


def power_feasible(power, budget, p_min, p_max, tol=1e-12) -> bool:
    power = np.asarray(power, dtype=np.float64)
    if np.any(power < p_min - tol) or np.any(power > p_max + tol):
        return False
    return bool(power.sum() <= budget + tol)
