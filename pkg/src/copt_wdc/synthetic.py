"""Synthetic compositional problem with a closed-form optimum.

The inner maps are noisy shifts of the identity, the outer objective is a
quadratic pull toward a target, and a single halfspace constraint caps the
first coordinate.  The constrained optimum is a componentwise clip, so
convergence experiments have exact references for both the gap and the
violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import CompositionalProblem, PenaltySpec


@dataclass(frozen=True)
class SyntheticInfo:
    """Closed-form facts about one synthetic instance."""

    target: np.ndarray
    mean_shift: np.ndarray
    threshold: float
    box_lo: float
    box_hi: float
    noise: float
    x_star: np.ndarray
    f_star: float

    def true_objective(self, x) -> float:
        diff = np.asarray(x) + self.mean_shift - self.target
        return 0.5 * float(diff @ diff)

    def true_violation(self, x) -> float:
        return max(0.0, float(np.asarray(x)[0] - self.threshold))

    def gap(self, x) -> float:
        return abs(self.true_objective(x) - self.f_star)


def make_synthetic_problem(
    dim: int = 2,
    target=(0.6, -0.4),
    mean_shift=(0.1, -0.1),
    constraint_margin: float = 0.0,
    noise: float = 0.6,
    box: tuple[float, float] = (-1.0, 1.0),
) -> tuple[CompositionalProblem, SyntheticInfo, PenaltySpec]:
    """Build an instance whose constraint sits ``constraint_margin`` above
    (positive) or below (negative) the unconstrained minimizer's first
    coordinate.

    The defaults put the constraint boundary exactly at the unconstrained
    minimizer with substantial sampling noise, so the tracking estimates
    keep crossing the penalty kink at stationarity and the quality of the
    tracking scheme stays visible in the final gap.
    """
    target = np.asarray(target, dtype=np.float64)
    mean_shift = np.asarray(mean_shift, dtype=np.float64)
    if target.shape != (dim,) or mean_shift.shape != (dim,):
        raise ValueError("target and mean_shift must match dim")
    lo, hi = box
    unconstrained = target - mean_shift
    threshold = float(unconstrained[0] + constraint_margin)
    x_star = np.clip(unconstrained, lo, hi)
    x_star[0] = min(x_star[0], threshold)
    diff = x_star - unconstrained
    info = SyntheticInfo(
        target=target,
        mean_shift=mean_shift,
        threshold=threshold,
        box_lo=lo,
        box_hi=hi,
        noise=noise,
        x_star=x_star,
        f_star=0.5 * float(diff @ diff),
    )
    mean_full = np.concatenate([mean_shift, np.zeros(dim)])

    def sampler(rng):
        return mean_full + noise * rng.standard_normal(2 * dim)

    def inner_g(x, xi):
        return x + xi[:dim]

    def inner_h(x, xi):
        return x + xi[dim:]

    def identity_tvp(x, xi, vec):
        return np.asarray(vec, dtype=np.float64)

    def outer_f(y):
        d = y - target
        return 0.5 * float(d @ d)

    def outer_f_grad(y):
        return y - target

    def outer_q(z):
        return np.array([z[0] - threshold])

    def outer_q_tvp(z, vec):
        out = np.zeros(dim)
        out[0] = vec[0]
        return out

    def prox(v, step):
        return v.clip(lo, hi)

    problem = CompositionalProblem(
        dim_x=dim,
        dim_g=dim,
        dim_h=dim,
        num_constraints=1,
        inner_g=inner_g,
        inner_h=inner_h,
        jacobian_g_tvp=identity_tvp,
        jacobian_h_tvp=identity_tvp,
        outer_f=outer_f,
        outer_f_grad=outer_f_grad,
        outer_q=outer_q,
        outer_q_tvp=outer_q_tvp,
        prox=prox,
        sampler=sampler,
    )
    penalty = PenaltySpec(cap=2.0)
    return problem, info, penalty
