"""Abstract constrained compositional problem and the constraint penalty.

A problem couples inner stochastic maps g, h with outer deterministic maps
f, q, a proximal regularizer, and a seeded sampler.  Expectations sit inside
f and q, so single-sample gradients are biased; solvers in this package keep
running tracking estimates of the inner expectations instead.

Constraint violations are charged through a one-sided Huber penalty:
quadratic on [0, cap], linear with slope ``cap`` beyond, zero below zero.
Its gradient is therefore bounded by ``cap`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

Array = np.ndarray
Sample = Any


@dataclass(frozen=True)
class CompositionalProblem:
    """Bundle of evaluators defining one compositional program.

    All evaluators must be pure.  Jacobians are exposed as
    transpose-vector products only; full Jacobians are never materialized.
    """

    dim_x: int
    dim_g: int
    dim_h: int
    num_constraints: int
    inner_g: Callable[[Array, Sample], Array]
    inner_h: Callable[[Array, Sample], Array]
    jacobian_g_tvp: Callable[[Array, Sample, Array], Array]
    jacobian_h_tvp: Callable[[Array, Sample, Array], Array]
    outer_f: Callable[[Array], float]
    outer_f_grad: Callable[[Array], Array]
    outer_q: Callable[[Array], Array]
    outer_q_tvp: Callable[[Array, Array], Array]
    prox: Callable[[Array, float], Array]
    sampler: Callable[[np.random.Generator], Sample]

    def __post_init__(self):
        for name in ("dim_x", "dim_g", "dim_h", "num_constraints"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class PenaltySpec:
    """Configuration of the one-sided Huber penalty: the slope cap."""

    cap: float

    def __post_init__(self):
        if not np.isfinite(self.cap) or self.cap <= 0:
            raise ValueError("penalty cap must be a positive finite scalar")


def penalty_value(v, spec: PenaltySpec) -> float:
    """Sum of per-constraint penalties.

    Each coordinate contributes x^2/2 on [0, cap], cap*x - cap^2/2 above
    cap, and 0 below 0.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite constraint value passed to penalty")
    cap = spec.cap
    pos = np.clip(v, 0.0, cap)
    quad = 0.5 * pos * pos
    lin = cap * np.clip(v - cap, 0.0, None)
    return float(np.sum(quad + lin))


def penalty_grad(v, spec: PenaltySpec) -> Array:
    """Exact derivative of :func:`penalty_value`: clip(v, 0, cap)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite constraint value passed to penalty gradient")
    return np.clip(v, 0.0, spec.cap)


def penalized_constraint_grad_tvp(
    problem: CompositionalProblem, x, sample, z, spec: PenaltySpec, qz=None
) -> Array:
    """Gradient contribution of the penalized constraints at (x, z).

    Computes J_h(x, xi)^T [J_q(z)^T penalty_grad(q(z))].  Returns an exact
    zero vector when q(z) <= 0 componentwise, so feasible iterates pay no
    evaluator calls on the constraint chain.  ``qz`` may carry a precomputed
    ``outer_q(z)`` (solver loops reuse the previous tracking update's value).
    """
    if qz is None:
        qz = np.asarray(problem.outer_q(z), dtype=np.float64)
    worst = float(qz.max())
    if not math.isfinite(worst):
        raise ValueError("non-finite constraint value passed to penalty gradient")
    if worst <= 0.0:
        return np.zeros(problem.dim_x)
    lam = qz.clip(0.0, spec.cap)
    inner = problem.outer_q_tvp(z, lam)
    out = np.asarray(problem.jacobian_h_tvp(x, sample, inner), dtype=np.float64)
    if not math.isfinite(float(out.sum())):
        raise ValueError("constraint gradient chain produced non-finite values")
    return out


def estimate_penalty_cap(
    problem: CompositionalProblem,
    n_points: int = 10_000,
    seed: int = 0,
    safety: float = 2.0,
    draws_per_point: int = 8,
) -> float:
    """Estimate the penalty slope cap by sampling feasible points.

    Draws standard-normal points, projects them onto the feasible set,
    evaluates the constraint map at a small-sample mean of the inner map
    (single draws overweight heavy-tailed outliers), and returns ``safety``
    times the largest value observed, floored at 1.0.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        x = problem.prox(rng.standard_normal(problem.dim_x), 1.0)
        h_bar = np.zeros(problem.dim_h)
        for _ in range(draws_per_point):
            h_bar += np.asarray(problem.inner_h(x, problem.sampler(rng)))
        q = np.asarray(problem.outer_q(h_bar / draws_per_point))
        worst = max(worst, float(np.max(q)))
    return max(1.0, safety * worst)
