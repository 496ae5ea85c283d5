"""Experiment harness: scenario generation, solver runs, validation report.

Scenario generation calibrates arrival rates by Monte-Carlo so the uniform
baseline lands at a prescribed worst-server load, then sets delay caps
relative to the baseline waits; both calibrations are seeded and therefore
reproducible.  The runner fans seeds out across worker threads (capped by
``COPT_WDC_THREADS``), writes one trajectory CSV and one summary JSON per
run, and merges a strided comparison CSV across runs in deterministic key
order.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datacenter import (
    DecisionVector,
    Scenario,
    build_problem,
    equiprobable_policy,
    estimate_inner_means,
    estimate_scenario_penalty_cap,
    outer_q,
    pk_delay,
    throughput,
    zipf_rates,
)
from .errors import DivergenceError, UnstableQueueError
from .problem import PenaltySpec
from .schedules import preset_by_name, table1_presets
from .solvers import Trajectory, run_acscpg, run_cscgd
from .synthetic import make_synthetic_problem
from .validation import check_des_vs_pk, check_gradients, check_projections, scale_load_to_target

DEFAULT_WDC_STEP_SCALE = 0.1
COMPARISON_COLUMNS = ("solver", "seed", "t", "objective", "max_violation", "step_norm")


def _paper_iv_positions() -> np.ndarray:
    angles = np.deg2rad(45.0 * np.arange(8))
    ring = np.stack([0.5 * np.cos(angles), 0.5 * np.sin(angles)], axis=1)
    return np.vstack([ring, [[-2.0, 0.0], [2.0, 0.0]]])


def _desk_positions() -> np.ndarray:
    angles = np.deg2rad(90.0 * np.arange(4))
    ring = np.stack([0.25 * np.cos(angles), 0.25 * np.sin(angles)], axis=1)
    return np.vstack([ring, [[-2.0, 0.0], [2.0, 0.0]]])


def _random_placement(n_files, n_servers, n_per_file, rng) -> np.ndarray:
    mask = np.zeros((n_files, n_servers), dtype=bool)
    for i in range(n_files):
        mask[i, rng.choice(n_servers, size=n_per_file, replace=False)] = True
    return mask


def _calibrate_rates(scenario: Scenario, target_max_load: float, seed: int) -> Scenario:
    """Scale arrival rates so the uniform baseline peaks at the target load."""
    x = equiprobable_policy(scenario).ravel()
    u, _, _ = estimate_inner_means(scenario, x, 20_000, seed)
    peak = scenario.chunk_bits * float(np.max(u))
    return replace(scenario, arrival_rates=scenario.arrival_rates * (target_max_load / peak))


def _calibrate_delay_caps(scenario: Scenario, cap_fraction: float, seed: int) -> Scenario:
    """Set a uniform delay cap at a fraction of the worst baseline wait."""
    x = equiprobable_policy(scenario).ravel()
    u, v, _ = estimate_inner_means(scenario, x, 20_000, seed)
    waits = [
        pk_delay(u[j], v[j], scenario.chunk_bits) for j in range(scenario.n_servers)
    ]
    cap = cap_fraction * max(waits)
    return replace(scenario, delay_caps=np.full(scenario.n_servers, cap))


def gen_scenario(kind: str, seed: int = 0, overrides: dict | None = None) -> Scenario:
    """Build a named scenario; ``overrides`` replace fields after calibration."""
    rng = np.random.default_rng(seed)
    if kind == "paper-iv":
        m, n = 10, 100
        scenario = Scenario(
            n_servers=m,
            n_files=n,
            code_n=np.full(n, 8),
            code_k=np.full(n, 4),
            placement=_random_placement(n, m, 8, rng),
            arrival_rates=zipf_rates(n, 2.0, 1.0),
            chunk_bits=1e6,
            bandwidths=np.full(m, 1e6),
            delay_caps=np.full(m, 5e-3),
            power_budget=10.0,
            power_min=1e-3,
            power_max=10.0,
            utility="log1p",
            zipf_skew=2.0,
            server_positions=_paper_iv_positions(),
            user_radius=1.0,
            fading_floor=1e-6,
            penalty_cap=10.0,
        )
        scenario = _calibrate_rates(scenario, 0.7, seed + 1)
    elif kind == "desk":
        m, n = 6, 20
        scenario = Scenario(
            n_servers=m,
            n_files=n,
            code_n=np.full(n, 4),
            code_k=np.full(n, 2),
            placement=_random_placement(n, m, 4, rng),
            arrival_rates=zipf_rates(n, 2.0, 1.0),
            chunk_bits=2e5,
            bandwidths=np.array([1e6, 1e6, 1e6, 1e6, 2.5e7, 2.5e7]),
            delay_caps=np.full(m, 1.0),
            power_budget=8.0,
            power_min=8.0 / m * 1e-3,
            power_max=8.0,
            utility="log1p",
            zipf_skew=2.0,
            server_positions=_desk_positions(),
            user_radius=1.0,
            fading_floor=0.1,
            penalty_cap=10.0,
        )
        scenario = _calibrate_rates(scenario, 0.55, seed + 1)
        scenario = _calibrate_delay_caps(scenario, 0.6, seed + 2)
        scenario = replace(
            scenario,
            penalty_cap=estimate_scenario_penalty_cap(scenario, 10_000, seed + 3),
        )
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")
    if overrides:
        scenario = replace(scenario, **overrides)
    return scenario


@dataclass
class ExperimentConfig:
    scenario: Scenario
    preset: str = "t1-row3"
    horizon: int = 20_000
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "out"
    solver: str = "acscpg"  # acscpg | cscgd | both
    step_scale: float = DEFAULT_WDC_STEP_SCALE
    beta_scale: float = 3.0
    n_samples: int = 20_000
    des_horizon: int = 100_000
    comparison_stride: int | None = None

    def __post_init__(self):
        if self.horizon % 2 != 0 or self.horizon < 4:
            raise ValueError("horizon must be even and >= 4")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.solver not in ("acscpg", "cscgd", "both"):
            raise ValueError("solver must be acscpg, cscgd, or both")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = dict(data)
        scenario = data.pop("scenario")
        if isinstance(scenario, str):
            path = Path(scenario)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            scenario = Scenario.from_json(path)
        elif isinstance(scenario, dict):
            scenario = Scenario.from_dict(scenario)
        return cls(scenario=scenario, **data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("COPT_WDC_THREADS", "")
    if env:
        return max(1, min(int(env), n_tasks))
    return max(1, min(os.cpu_count() or 1, n_tasks))


def _solver_fn(name: str):
    return run_acscpg if name == "acscpg" else run_cscgd


def _final_metrics(scenario: Scenario, x_hat: np.ndarray, n_samples: int, seed: int) -> dict:
    u, v, sum_rates = estimate_inner_means(scenario, x_hat, n_samples, seed)
    z = np.concatenate([u, v])
    surrogate = outer_q(z, scenario)
    metrics = {
        "max_violation_surrogate": float(np.max(surrogate)),
        "loads": [float(scenario.chunk_bits * u[j]) for j in range(scenario.n_servers)],
    }
    try:
        waits = [
            pk_delay(u[j], v[j], scenario.chunk_bits)
            for j in range(scenario.n_servers)
        ]
        metrics["waits"] = [float(w) for w in waits]
        metrics["max_violation"] = float(
            max(w - d for w, d in zip(waits, scenario.delay_caps))
        )
        metrics["throughput"] = throughput(x_hat, scenario, n_samples, seed + 1)
    except UnstableQueueError:
        metrics["waits"] = None
        metrics["max_violation"] = None
        metrics["throughput"] = None
    return metrics


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the configured solvers over all seeds and write artifacts.

    Returns the summary dict (also written as ``summary.json``).  Divergent
    runs are recorded rather than raised; the run fails only if every seed
    diverges."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = config.scenario
    problem = build_problem(scenario)
    penalty = PenaltySpec(cap=scenario.penalty_cap)
    preset = preset_by_name(config.preset, config.step_scale, config.beta_scale)
    solvers = ["acscpg", "cscgd"] if config.solver == "both" else [config.solver]
    tasks = [(solver, seed) for solver in solvers for seed in config.seeds]

    def run_one(task):
        solver, seed = task
        try:
            trajectory = _solver_fn(solver)(problem, penalty, preset, config.horizon, seed)
            return task, trajectory, None
        except DivergenceError as err:
            return task, err.trajectory, str(err)

    with ThreadPoolExecutor(max_workers=_worker_count(len(tasks))) as pool:
        results = {task: (traj, err) for task, traj, err in pool.map(run_one, tasks)}

    summary = {
        "preset": preset.name,
        "horizon": config.horizon,
        "step_scale": config.step_scale,
        "runs": {},
    }
    baseline = equiprobable_policy(scenario).ravel()
    summary["equiprobable"] = _final_metrics(scenario, baseline, config.n_samples, 9999)
    failures = 0
    for solver, seed in tasks:
        trajectory, error = results[(solver, seed)]
        key = f"{solver}_seed{seed}"
        entry = {"solver": solver, "seed": seed}
        if trajectory is not None:
            trajectory.to_csv(out / f"{key}.csv")
            trajectory.to_json(out / f"{key}.json")
        if error is not None:
            failures += 1
            entry["error"] = error
        else:
            entry.update(
                _final_metrics(scenario, trajectory.x_hat, config.n_samples, 10_000 + seed)
            )
            entry["final_objective_estimate"] = float(trajectory.objective[-1])
        summary["runs"][key] = entry
    _write_comparison(
        out / "comparison.csv",
        [results[t][0] for t in tasks if results[t][0] is not None],
        config.comparison_stride,
    )
    summary["all_failed"] = failures == len(tasks)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _write_comparison(path, trajectories: list[Trajectory], stride: int | None):
    rows = []
    for traj in trajectories:
        step = stride or max(1, traj.horizon // 1000)
        idx = list(range(0, len(traj), step))
        if idx and idx[-1] != len(traj) - 1:
            idx.append(len(traj) - 1)
        for i in idx:
            rows.append(
                (
                    traj.solver,
                    traj.seed,
                    int(traj.t[i]),
                    repr(float(traj.objective[i])),
                    repr(float(traj.max_violation[i])),
                    repr(float(traj.step_norm[i])),
                )
            )
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        writer.writerows(rows)


def synthetic_study(
    horizons=(1_000, 10_000, 100_000),
    seeds=range(10),
    out_dir: str = "out-synthetic",
    presets: list[str] | None = None,
) -> list[dict]:
    """Gap/violation study on the synthetic problem for every preset and
    both solvers; writes one CSV of results and returns the rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, info, penalty = make_synthetic_problem()
    rows = []
    wanted = presets or [p.name for p in table1_presets()]
    horizons = sorted(horizons)
    top = horizons[-1]
    for preset_name in wanted:
        preset = preset_by_name(preset_name)
        for solver in ("acscpg", "cscgd"):
            for seed in seeds:
                history = []
                _solver_fn(solver)(
                    problem, penalty, preset, top, seed,
                    callback=lambda st: history.append(st.x.copy()),
                )
                xs = np.asarray(history)
                for horizon in horizons:
                    x_hat = xs[horizon // 2 - 1 : horizon - 1].mean(axis=0)
                    rows.append(
                        {
                            "preset": preset_name,
                            "solver": solver,
                            "seed": int(seed),
                            "horizon": horizon,
                            "gap": info.gap(x_hat),
                            "violation": info.true_violation(x_hat),
                        }
                    )
    with open(out / "synthetic.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["preset", "solver", "seed", "horizon", "gap", "violation"])
        for row in rows:
            writer.writerow(
                [
                    row["preset"],
                    row["solver"],
                    row["seed"],
                    row["horizon"],
                    repr(row["gap"]),
                    repr(row["violation"]),
                ]
            )
    return rows


def validate(scenario: Scenario | None = None, seed: int = 0, quick: bool = False) -> dict:
    """Run the oracle suites and return a pass/fail report."""
    scenario = scenario or gen_scenario("desk", seed=seed)
    problem = build_problem(scenario)
    penalty = PenaltySpec(cap=scenario.penalty_cap)
    n_grad = 25 if quick else 100
    n_proj = 200 if quick else 1000
    des_samples = 200_000 if quick else 1_000_000
    horizon = 50_000 if quick else 100_000
    baseline = equiprobable_policy(scenario).ravel()
    scaled = scale_load_to_target(scenario, baseline, 0, 0.6, seed=seed + 1)
    report = {
        "gradients": check_gradients(problem, penalty, n_grad, seed),
        "projections": check_projections(n_proj, seed),
        "des_vs_pk": check_des_vs_pk(
            scaled, baseline, 0, horizon=horizon, seed=seed, moment_samples=des_samples
        ),
    }
    report["passed"] = all(r["passed"] for r in report.values() if isinstance(r, dict))
    return report
