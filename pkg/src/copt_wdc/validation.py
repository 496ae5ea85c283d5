"""Cross-checking suites: finite differences, projection oracle, queue oracle.

Each suite returns a plain dict with a boolean ``passed`` plus diagnostics,
so the experiment runner can aggregate them into a machine-readable report
and tests can assert on the details.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import qp_oracle
from .datacenter import Scenario, estimate_inner_means, pk_delay, simulate_mg1
from .problem import CompositionalProblem, PenaltySpec, penalized_constraint_grad_tvp, penalty_value
from .projections import project_capped_simplex, project_power


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def fd_directional(fun, x, direction, eps):
    """Central finite difference of a scalar function along a direction."""
    return (fun(x + eps * direction) - fun(x - eps * direction)) / (2.0 * eps)


def check_gradients(
    problem: CompositionalProblem,
    penalty: PenaltySpec,
    n_points: int = 100,
    seed: int = 0,
    tol: float = 1e-5,
    samples_per_point: int = 1,
) -> dict:
    """FD-verify every Jacobian-transpose product the problem exposes.

    Probe vectors are scaled inversely to the evaluator output magnitudes
    so no output block is swamped; x-directions are unit vectors with a
    step proportional to (1 + ||x||).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_case = ""
    for point in range(n_points):
        x = np.asarray(problem.prox(rng.standard_normal(problem.dim_x), 1.0))
        eps = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        for _ in range(samples_per_point):
            sample = problem.sampler(rng)
            direction = rng.standard_normal(problem.dim_x)
            direction /= np.linalg.norm(direction)

            g0 = np.asarray(problem.inner_g(x, sample))
            probe_g = rng.standard_normal(problem.dim_g) / (np.abs(g0) + 1.0)
            analytic = float(
                np.asarray(problem.jacobian_g_tvp(x, sample, probe_g)) @ direction
            )
            fd = fd_directional(
                lambda p: float(probe_g @ np.asarray(problem.inner_g(p, sample))),
                x,
                direction,
                eps,
            )
            err = _rel_err(analytic, fd)
            if err > worst:
                worst, worst_case = err, f"inner_g tvp at point {point}"

            h0 = np.asarray(problem.inner_h(x, sample))
            probe_h = rng.standard_normal(problem.dim_h) / (np.abs(h0) + 1e-9)
            analytic = float(
                np.asarray(problem.jacobian_h_tvp(x, sample, probe_h)) @ direction
            )
            fd = fd_directional(
                lambda p: float(probe_h @ np.asarray(problem.inner_h(p, sample))),
                x,
                direction,
                eps,
            )
            err = _rel_err(analytic, fd)
            if err > worst:
                worst, worst_case = err, f"inner_h tvp at point {point}"

            # outer f gradient at a tracked-average-like argument
            y = g0
            probe_y = rng.standard_normal(problem.dim_g) / (np.abs(y) + 1.0)
            analytic = float(np.asarray(problem.outer_f_grad(y)) @ (probe_y))
            fd = fd_directional(
                lambda p: float(problem.outer_f(p)), y, probe_y, 1e-6 * (1 + np.linalg.norm(y))
            )
            err = _rel_err(analytic, fd)
            if err > worst:
                worst, worst_case = err, f"outer_f grad at point {point}"

            # outer q along multiplicative (positivity-preserving) directions
            z = np.abs(h0) + 1e-12
            probe_q = rng.standard_normal(problem.num_constraints)
            dz = z * rng.standard_normal(problem.dim_h)
            analytic = float(np.asarray(problem.outer_q_tvp(z, probe_q)) @ dz)
            fd = fd_directional(
                lambda p: float(probe_q @ np.asarray(problem.outer_q(p))), z, dz, 1e-7
            )
            err = _rel_err(analytic, fd)
            if err > worst:
                worst, worst_case = err, f"outer_q tvp at point {point}"

            # full penalized constraint chain at z = h(x, sample)
            def chain(p):
                hp = np.asarray(problem.inner_h(p, sample))
                return penalty_value(np.asarray(problem.outer_q(hp)), penalty)

            analytic_vec = penalized_constraint_grad_tvp(problem, x, sample, h0, penalty)
            analytic = float(analytic_vec @ direction)
            fd = fd_directional(chain, x, direction, eps)
            scale = max(abs(analytic), abs(fd), 1e-7)
            err = abs(analytic - fd) / scale
            if err > worst:
                worst, worst_case = err, f"penalty chain at point {point}"

    return {
        "suite": "gradients",
        "passed": bool(worst <= tol),
        "max_rel_err": worst,
        "worst_case": worst_case,
        "tol": tol,
        "n_points": n_points,
    }


def check_projections(n_instances: int = 1000, seed: int = 0, tol: float = 1e-8, max_dim: int = 8) -> dict:
    """Random capped-simplex and budget-box instances against the QP oracle,
    plus idempotence and non-expansiveness."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_case = ""
    for i in range(n_instances):
        d = int(rng.integers(2, max_dim + 1))
        v = rng.normal(0.0, 2.0, size=d)
        support = rng.random(d) < 0.8
        if not support.any():
            support[rng.integers(d)] = True
        quota = int(rng.integers(1, support.sum() + 1))
        ours = project_capped_simplex(v, quota, support)
        ref = qp_oracle.capped_simplex_qp(v, quota, support)
        err = float(np.linalg.norm(ours - ref))
        if err > worst:
            worst, worst_case = err, f"capped simplex instance {i}"
        again = project_capped_simplex(ours, quota, support)
        err = float(np.linalg.norm(again - ours))
        if err > worst:
            worst, worst_case = err, f"capped simplex idempotence {i}"

        lo = float(rng.random() * 0.1)
        hi = lo + 0.5 + float(rng.random())
        budget = d * lo + float(rng.random()) * d * (hi - lo) * 0.8 + 1e-6
        w = rng.normal(0.0, 2.0, size=d)
        ours_p = project_power(w, budget, lo, hi)
        ref_p = qp_oracle.power_qp(w, budget, lo, hi)
        err = float(np.linalg.norm(ours_p - ref_p))
        if err > worst:
            worst, worst_case = err, f"power instance {i}"
        w2 = rng.normal(0.0, 2.0, size=d)
        lhs = float(np.linalg.norm(ours_p - project_power(w2, budget, lo, hi)))
        if lhs > float(np.linalg.norm(w - w2)) + 1e-10:
            worst, worst_case = max(worst, 1.0), f"power non-expansiveness {i}"
    return {
        "suite": "projections",
        "passed": bool(worst <= tol),
        "max_err": worst,
        "worst_case": worst_case,
        "tol": tol,
        "n_instances": n_instances,
    }


def scale_load_to_target(
    scenario: Scenario, x, server: int, rho_target: float, n_samples: int = 20_000, seed: int = 0
) -> Scenario:
    """Rescale all arrival rates so one server's load hits ``rho_target``.

    Loads are linear in the arrival rates, so a single multiplicative factor
    suffices."""
    u, _, _ = estimate_inner_means(scenario, x, n_samples, seed)
    rho = scenario.chunk_bits * u[server]
    if rho <= 0:
        raise ValueError(f"server {server} has zero load; cannot rescale")
    return replace(scenario, arrival_rates=scenario.arrival_rates * (rho_target / rho))


def check_des_vs_pk(
    scenario: Scenario,
    x,
    server: int,
    horizon: int = 100_000,
    seed: int = 0,
    moment_samples: int = 1_000_000,
    rel_tol: float = 0.05,
) -> dict:
    """Discrete-event mean wait against the closed-form mean wait.

    Passes when the relative gap is within ``rel_tol`` or the formula value
    lies inside the simulation's 95% confidence interval."""
    u, v, _ = estimate_inner_means(scenario, x, moment_samples, seed + 1)
    formula = pk_delay(u[server], v[server], scenario.chunk_bits)
    estimate = simulate_mg1(scenario, server, x, horizon, seed)
    rel = abs(estimate.mean_wait - formula) / formula
    return {
        "suite": "des_vs_pk",
        "passed": bool(rel <= rel_tol or estimate.overlaps(formula)),
        "formula_wait": formula,
        "sim_wait": estimate.mean_wait,
        "ci95": estimate.ci95,
        "rel_err": rel,
        "server": server,
        "load": scenario.chunk_bits * float(u[server]),
    }
