"""Erasure-coded wireless data-center model.

A scenario holds the fleet description: per-file MDS codes and placements,
request rates, channel geometry, bandwidths, delay caps, and the power box.
The decision variable pairs a per-server power vector with an N x M matrix
of per-file scheduling probabilities.  Everything the solvers need is
exposed through :func:`build_problem`, which adapts the model onto the
compositional interface with analytic Jacobian-transpose products.

Units: rates in bits/s, powers in watts, delays in seconds.  Noise power is
normalized into the channel gains.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigurationError, SingularRateError, UnstableQueueError
from .problem import CompositionalProblem
from .projections import PolicySupport, prox_policy_power
from .queueing import QueueEstimate, pk_delay, simulate_fifo_queue

LN2 = float(np.log(2.0))

# Delay constraints are smoothed near instability: when the spare capacity
# 1 - load drops below this clamp the denominator is frozen so the
# constraint value and gradient stay finite and keep pointing toward load
# reduction.
STABILITY_CLAMP = 1e-3

_DISTANCE_FLOOR = 1e-9

# The tracking updates query the inner maps at extrapolated points that can
# leave the feasible box, so the power-to-rate map needs a total domain.
# Below the box floor the effective power continues as the positive
# rational tail floor^2 / (2*floor - p), which matches value and slope at
# the floor (C^1) and decays without underflowing; everything at or above
# the floor is untouched.


def _effective_power(power, floor):
    denom = np.maximum(2.0 * floor - power, floor)
    return np.where(power >= floor, power, floor**2 / denom)


def _effective_power_slope(power, floor):
    denom = np.maximum(2.0 * floor - power, floor)
    return np.where(power >= floor, 1.0, (floor / denom) ** 2)


@dataclass(frozen=True)
class Scenario:
    """Full description of one data center."""

    n_servers: int
    n_files: int
    code_n: np.ndarray  # (N,) chunks stored per file
    code_k: np.ndarray  # (N,) chunks needed per request
    placement: np.ndarray  # (N, M) bool
    arrival_rates: np.ndarray  # (N,) requests/s
    chunk_bits: float
    bandwidths: np.ndarray  # (M,) Hz
    delay_caps: np.ndarray  # (M,) s
    power_budget: float
    power_min: float
    power_max: float
    utility: str = "log1p"
    zipf_skew: float = 2.0
    server_positions: np.ndarray = field(default=None)  # (M, 2)
    user_radius: float = 1.0
    pathloss_gain: float = 1.0
    pathloss_ref_distance: float = 1.0
    pathloss_exponent: float = 3.0
    fading_floor: float = 1e-6
    noise_power: float = 1.0
    penalty_cap: float = 10.0

    def __post_init__(self):
        conv = {
            "code_n": np.int64,
            "code_k": np.int64,
            "arrival_rates": np.float64,
            "bandwidths": np.float64,
            "delay_caps": np.float64,
            "server_positions": np.float64,
        }
        for name, dtype in conv.items():
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype))
        object.__setattr__(self, "placement", np.asarray(self.placement, dtype=bool))
        m, n = self.n_servers, self.n_files
        if self.placement.shape != (n, m):
            raise ConfigurationError("placement must be (n_files, n_servers)")
        if self.server_positions.shape != (m, 2):
            raise ConfigurationError("server_positions must be (n_servers, 2)")
        for name, size in (("code_n", n), ("code_k", n), ("arrival_rates", n),
                           ("bandwidths", m), ("delay_caps", m)):
            if getattr(self, name).shape != (size,):
                raise ConfigurationError(f"{name} must have length {size}")
        counts = self.placement.sum(axis=1)
        if np.any(self.code_n != counts):
            raise ConfigurationError("each file must be placed on exactly code_n servers")
        if np.any(self.code_k > self.code_n):
            raise ConfigurationError("code_k must not exceed code_n")
        if np.any(self.arrival_rates <= 0) or np.any(self.delay_caps <= 0):
            raise ConfigurationError("arrival rates and delay caps must be positive")
        if np.any(self.bandwidths <= 0) or self.chunk_bits <= 0:
            raise ConfigurationError("bandwidths and chunk_bits must be positive")
        if self.power_min <= 0 or self.power_min >= self.power_max:
            raise ConfigurationError("need 0 < power_min < power_max")
        if m * self.power_min > self.power_budget:
            raise ConfigurationError("power floor exceeds the budget")
        if self.utility not in ("linear", "log1p"):
            raise ConfigurationError("utility must be 'linear' or 'log1p'")
        if self.fading_floor <= 0:
            raise ConfigurationError("fading_floor must be positive")

    @property
    def dim_x(self) -> int:
        return self.n_servers + self.n_files * self.n_servers

    def support(self) -> PolicySupport:
        return PolicySupport(mask=self.placement, quotas=self.code_k.astype(np.float64))

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, np.ndarray):
                data[key] = value.tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(**data)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class DecisionVector:
    """Per-server powers plus the N x M scheduling probability matrix."""

    power: np.ndarray
    policy: np.ndarray

    def ravel(self) -> np.ndarray:
        return np.concatenate([self.power, self.policy.ravel()])

    @classmethod
    def from_flat(cls, flat, n_servers: int, n_files: int) -> "DecisionVector":
        flat = np.asarray(flat, dtype=np.float64)
        return cls(
            power=flat[:n_servers].copy(),
            policy=flat[n_servers:].reshape(n_files, n_servers).copy(),
        )


def zipf_rates(n_files: int, skew: float, total_rate: float) -> np.ndarray:
    """Request rates proportional to rank**-skew, summing to total_rate."""
    if n_files < 1 or skew < 0 or total_rate <= 0:
        raise ValueError("need n_files >= 1, skew >= 0, total_rate > 0")
    weights = np.arange(1, n_files + 1, dtype=np.float64) ** (-skew)
    return total_rate * weights / weights.sum()


def sample_channel(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """One effective-gain matrix: per file, a fresh user position in the
    service disk; per (file, server), independent exponential power fading
    over the cubic-law path loss, floored at the scenario fading floor."""
    n, m = scenario.n_files, scenario.n_servers
    radius = scenario.user_radius * np.sqrt(rng.random(n))
    angle = 2.0 * np.pi * rng.random(n)
    users = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    diff = users[:, None, :] - scenario.server_positions[None, :, :]
    dist = np.maximum(np.linalg.norm(diff, axis=2), _DISTANCE_FLOOR)
    loss = scenario.pathloss_gain * (dist / scenario.pathloss_ref_distance) ** (
        -scenario.pathloss_exponent
    )
    fading = rng.exponential(1.0, size=(n, m))
    return np.maximum(scenario.fading_floor, loss * fading / scenario.noise_power)


def capacity(power, gain, bandwidth):
    """Shannon rate in bits/s: bandwidth * log2(1 + power * gain)."""
    power = np.asarray(power, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    if np.any(power < 0) or np.any(gain < 0):
        raise ValueError("power and gain must be nonnegative")
    return bandwidth * np.log2(1.0 + power * gain)


def _rate_matrix(scenario: Scenario, power, xi):
    eff = _effective_power(power, scenario.power_min)
    return scenario.bandwidths[None, :] * np.log1p(eff[None, :] * xi) / LN2


def _rate_power_slope(scenario: Scenario, power, xi):
    """d(rate)/d(power), including the sub-floor extension's slope."""
    eff = _effective_power(power, scenario.power_min)
    slope = _effective_power_slope(power, scenario.power_min)
    return (
        scenario.bandwidths[None, :]
        * xi
        * slope[None, :]
        / ((1.0 + eff[None, :] * xi) * LN2)
    )


def _split(scenario: Scenario, x):
    x = np.asarray(x, dtype=np.float64)
    m = scenario.n_servers
    return x[:m], x[m:].reshape(scenario.n_files, m)


def inner_g(x, xi, scenario: Scenario) -> np.ndarray:
    """Per-server aggregate rate over all current user positions."""
    power, _ = _split(scenario, x)
    return _rate_matrix(scenario, power, xi).sum(axis=0)


def inner_h(x, xi, scenario: Scenario) -> np.ndarray:
    """Scaled service moments per server, stacked [u, v].

    ``u_j`` sums policy-weighted arrival rates over inverse service rates,
    ``v_j`` over inverse squared rates, so the expected values are the load
    and second-moment terms of the per-server delay formula.
    """
    power, policy = _split(scenario, x)
    rates = _rate_matrix(scenario, power, xi)
    if rates.min() <= 0.0:
        raise SingularRateError("zero service rate on a supported placement pair")
    weighted = policy * scenario.arrival_rates[:, None]
    inv = np.where(scenario.placement, 1.0 / np.where(rates > 0, rates, 1.0), 0.0)
    u = (weighted * inv).sum(axis=0)
    v = (weighted * inv * inv).sum(axis=0)
    return np.concatenate([u, v])


def jacobian_g_tvp(x, xi, vec, scenario: Scenario) -> np.ndarray:
    """Transpose-Jacobian product of :func:`inner_g`; policy block is zero."""
    power, _ = _split(scenario, x)
    vec = np.asarray(vec, dtype=np.float64)
    drate_dp = _rate_power_slope(scenario, power, xi)
    out = np.zeros(scenario.dim_x)
    out[: scenario.n_servers] = vec * drate_dp.sum(axis=0)
    return out


def jacobian_h_tvp(x, xi, vec, scenario: Scenario) -> np.ndarray:
    """Transpose-Jacobian product of :func:`inner_h` with vec = [s_u, s_v]."""
    power, policy = _split(scenario, x)
    vec = np.asarray(vec, dtype=np.float64)
    m = scenario.n_servers
    s_u, s_v = vec[:m], vec[m:]
    rates = _rate_matrix(scenario, power, xi)
    inv = np.where(scenario.placement, 1.0 / np.where(rates > 0, rates, 1.0), 0.0)
    drate_dp = _rate_power_slope(scenario, power, xi)
    weighted = policy * scenario.arrival_rates[:, None]
    inv2 = inv * inv
    du_dp = -(weighted * inv2 * drate_dp).sum(axis=0)
    dv_dp = -2.0 * (weighted * inv2 * inv * drate_dp).sum(axis=0)
    out = np.empty(scenario.dim_x)
    out[:m] = s_u * du_dp + s_v * dv_dp
    lam = scenario.arrival_rates[:, None]
    out[m:] = (lam * (s_u[None, :] * inv + s_v[None, :] * inv2)).ravel()
    return out


def outer_f(y, scenario: Scenario) -> float:
    """Negated utility of per-server aggregate rates (solvers minimize)."""
    y = np.asarray(y, dtype=np.float64)
    if scenario.utility == "linear":
        return float(-np.sum(y))
    return float(-np.sum(np.log1p(y)))


def outer_f_grad(y, scenario: Scenario) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if scenario.utility == "linear":
        return -np.ones_like(y)
    return -1.0 / (1.0 + y)


def _q_split(scenario: Scenario, z):
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("service-moment estimates must be finite")
    m = scenario.n_servers
    return z[:m], z[m:]


def outer_q(z, scenario: Scenario) -> np.ndarray:
    """Delay-cap constraint values from tracked service moments.

    Applies the mean-wait formula with the spare capacity clamped below at
    :data:`STABILITY_CLAMP`, minus the per-server caps.  Accepts any real z:
    tracking estimates can transiently dip negative because the inner maps
    are queried at extrapolated points.
    """
    u, v = _q_split(scenario, z)
    bits = scenario.chunk_bits
    spare = np.maximum(STABILITY_CLAMP, 1.0 - bits * u)
    return bits**2 * v / (2.0 * spare) - scenario.delay_caps


def outer_q_tvp(z, vec, scenario: Scenario) -> np.ndarray:
    """Transpose-Jacobian product of :func:`outer_q`.

    Inside the clamped region the spare capacity is treated as constant, so
    the u-derivative vanishes there while the v-derivative keeps pushing
    load down.
    """
    u, v = _q_split(scenario, z)
    vec = np.asarray(vec, dtype=np.float64)
    bits = scenario.chunk_bits
    spare_raw = 1.0 - bits * u
    clamped = spare_raw <= STABILITY_CLAMP
    spare = np.maximum(STABILITY_CLAMP, spare_raw)
    dq_du = np.where(clamped, 0.0, bits**3 * v / (2.0 * spare**2))
    dq_dv = bits**2 / (2.0 * spare)
    return np.concatenate([vec * dq_du, vec * dq_dv])


def estimate_scenario_penalty_cap(
    scenario: Scenario,
    n_points: int = 10_000,
    seed: int = 0,
    draws_per_point: int = 8,
    safety: float = 2.0,
) -> float:
    """Penalty slope cap from the stable region of the feasible set.

    Samples projected random decisions, estimates the constraint values with
    a small-sample moment mean, and keeps only points whose worst load stays
    below one: past that the delay formula's clamp makes values arbitrarily
    large, which says nothing about the violation scale the penalty needs to
    cover.
    """
    rng = np.random.default_rng(seed)
    support = scenario.support()
    worst = 0.0
    for _ in range(n_points):
        x = prox_policy_power(
            rng.standard_normal(scenario.dim_x),
            support,
            scenario.power_budget,
            scenario.power_min,
            scenario.power_max,
        )
        h_bar = np.zeros(2 * scenario.n_servers)
        for _ in range(draws_per_point):
            h_bar += inner_h(x, sample_channel(scenario, rng), scenario)
        h_bar /= draws_per_point
        load = scenario.chunk_bits * h_bar[: scenario.n_servers].max()
        if load < 1.0 - STABILITY_CLAMP:
            worst = max(worst, float(outer_q(h_bar, scenario).max()))
    return max(1.0, safety * worst)


def equiprobable_policy(scenario: Scenario) -> DecisionVector:
    """Uniform feasible baseline: quota spread evenly over each support set,
    power spread evenly over servers (clamped to the box)."""
    ratio = scenario.code_k.astype(np.float64) / scenario.code_n.astype(np.float64)
    policy = np.where(scenario.placement, ratio[:, None], 0.0)
    level = np.clip(
        scenario.power_budget / scenario.n_servers,
        scenario.power_min,
        scenario.power_max,
    )
    power = np.full(scenario.n_servers, level)
    return DecisionVector(power=power, policy=policy)


def build_problem(scenario: Scenario) -> CompositionalProblem:
    """Adapt the scenario onto the compositional solver interface."""
    support = scenario.support()

    return CompositionalProblem(
        dim_x=scenario.dim_x,
        dim_g=scenario.n_servers,
        dim_h=2 * scenario.n_servers,
        num_constraints=scenario.n_servers,
        inner_g=lambda x, xi: inner_g(x, xi, scenario),
        inner_h=lambda x, xi: inner_h(x, xi, scenario),
        jacobian_g_tvp=lambda x, xi, vec: jacobian_g_tvp(x, xi, vec, scenario),
        jacobian_h_tvp=lambda x, xi, vec: jacobian_h_tvp(x, xi, vec, scenario),
        outer_f=lambda y: outer_f(y, scenario),
        outer_f_grad=lambda y: outer_f_grad(y, scenario),
        outer_q=lambda z: outer_q(z, scenario),
        outer_q_tvp=lambda z, vec: outer_q_tvp(z, vec, scenario),
        prox=lambda v, step: prox_policy_power(
            v,
            support,
            scenario.power_budget,
            scenario.power_min,
            scenario.power_max,
            step,
        ),
        sampler=lambda rng: sample_channel(scenario, rng),
    )


def estimate_inner_means(
    scenario: Scenario, x, n_samples: int, seed: int, chunk: int = 4096
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Monte-Carlo means of (u, v, per-server aggregate rate) at x.

    Draws are batched per chunk; results are deterministic given the seed
    and chunk size.
    """
    rng = np.random.default_rng(seed)
    power, policy = _split(scenario, np.asarray(x, dtype=np.float64))
    n, m = scenario.n_files, scenario.n_servers
    weighted = policy * scenario.arrival_rates[:, None]
    acc_u = np.zeros(m)
    acc_v = np.zeros(m)
    acc_g = np.zeros(m)
    done = 0
    while done < n_samples:
        take = min(chunk, n_samples - done)
        radius = scenario.user_radius * np.sqrt(rng.random((take, n)))
        angle = 2.0 * np.pi * rng.random((take, n))
        users = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=2)
        diff = users[:, :, None, :] - scenario.server_positions[None, None, :, :]
        dist = np.maximum(np.linalg.norm(diff, axis=3), _DISTANCE_FLOOR)
        loss = scenario.pathloss_gain * (
            dist / scenario.pathloss_ref_distance
        ) ** (-scenario.pathloss_exponent)
        fading = rng.exponential(1.0, size=(take, n, m))
        xi = np.maximum(scenario.fading_floor, loss * fading / scenario.noise_power)
        rates = scenario.bandwidths[None, None, :] * np.log1p(power[None, None, :] * xi) / LN2
        inv = np.where(scenario.placement[None, :, :], 1.0 / rates, 0.0)
        acc_u += (weighted[None, :, :] * inv).sum(axis=(0, 1))
        acc_v += (weighted[None, :, :] * inv * inv).sum(axis=(0, 1))
        acc_g += rates.sum(axis=(0, 1))
        done += take
    return acc_u / n_samples, acc_v / n_samples, acc_g / n_samples


def server_delays(scenario: Scenario, x, n_samples: int = 20_000, seed: int = 0):
    """Estimated mean waits per server at x (honest formula, no clamping)."""
    u, v, _ = estimate_inner_means(scenario, x, n_samples, seed)
    return np.array(
        [pk_delay(u[j], v[j], scenario.chunk_bits) for j in range(scenario.n_servers)]
    )


def throughput(x, scenario: Scenario, n_samples: int = 20_000, seed: int = 0) -> float:
    """Average effective rate across servers: mean of
    1 / (mean wait + 1 / aggregate rate).  Requires all queues stable."""
    u, v, sum_rates = estimate_inner_means(scenario, x, n_samples, seed)
    total = 0.0
    for j in range(scenario.n_servers):
        wait = pk_delay(u[j], v[j], scenario.chunk_bits)
        total += 1.0 / (wait + 1.0 / sum_rates[j])
    return total / scenario.n_servers


def simulate_mg1(
    scenario: Scenario,
    server: int,
    x,
    horizon: int,
    seed: int,
    stability_samples: int = 4000,
) -> QueueEstimate:
    """Discrete-event estimate of the mean wait at one server under x.

    Chunk requests arrive as a Poisson stream at the server's policy-
    weighted rate; each arrival belongs to file i with probability
    proportional to policy[i] * arrival_rate[i] and is served at a freshly
    drawn channel rate.
    """
    decision = DecisionVector.from_flat(x, scenario.n_servers, scenario.n_files)
    weights = decision.policy[:, server] * scenario.arrival_rates
    total_rate = float(weights.sum())
    if total_rate <= 0:
        raise ValueError(f"server {server} receives no traffic under this policy")
    rng = np.random.default_rng(seed)
    u, _, _ = estimate_inner_means(scenario, x, stability_samples, seed + 1)
    load = scenario.chunk_bits * u[server]
    if load >= 0.95:
        raise UnstableQueueError(
            f"server {server} load {load:.3f} >= 0.95; simulation refused"
        )
    probs = weights / total_rate
    positions = scenario.server_positions[server]
    power = decision.power[server]
    bandwidth = scenario.bandwidths[server]

    def service_sampler(sampler_rng, size):
        files = sampler_rng.choice(scenario.n_files, size=size, p=probs)
        radius = scenario.user_radius * np.sqrt(sampler_rng.random(size))
        angle = 2.0 * np.pi * sampler_rng.random(size)
        dx = radius * np.cos(angle) - positions[0]
        dy = radius * np.sin(angle) - positions[1]
        dist = np.maximum(np.sqrt(dx * dx + dy * dy), _DISTANCE_FLOOR)
        loss = scenario.pathloss_gain * (
            dist / scenario.pathloss_ref_distance
        ) ** (-scenario.pathloss_exponent)
        fading = sampler_rng.exponential(1.0, size=size)
        xi = np.maximum(scenario.fading_floor, loss * fading / scenario.noise_power)
        del files  # file identity only matters through the user draw
        rates = bandwidth * np.log1p(power * xi) / LN2
        return scenario.chunk_bits / rates

    return simulate_fifo_queue(total_rate, service_sampler, horizon, rng)
