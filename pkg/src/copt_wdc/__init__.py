"""Constrained stochastic compositional optimization with a wireless
erasure-coded data-center scheduling application."""

from .errors import (
    ConfigurationError,
    DivergenceError,
    InfeasibleQuotaError,
    OracleFailureError,
    SingularRateError,
    UnstableQueueError,
)
from .problem import (
    CompositionalProblem,
    PenaltySpec,
    estimate_penalty_cap,
    penalized_constraint_grad_tvp,
    penalty_grad,
    penalty_value,
)
from .schedules import SchedulePreset, preset_by_name, step_sizes, table1_presets, zeta_weights
from .projections import (
    PolicySupport,
    project_capped_simplex,
    project_power,
    prox_policy_power,
)
from .solvers import (
    SolverState,
    Trajectory,
    acscpg_step,
    run_acscpg,
    run_cscgd,
    saa_reference,
)
from .queueing import pk_delay, simulate_fifo_queue
from .datacenter import (
    DecisionVector,
    Scenario,
    build_problem,
    capacity,
    equiprobable_policy,
    inner_g,
    inner_h,
    outer_f,
    outer_q,
    sample_channel,
    simulate_mg1,
    throughput,
    zipf_rates,
)
from .synthetic import make_synthetic_problem
from .harness import ExperimentConfig, gen_scenario, run_experiment, synthetic_study, validate

__version__ = "0.1.0"
