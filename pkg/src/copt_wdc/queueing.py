"""M/G/1 waiting-time formula and its discrete-event cross-check.

``pk_delay`` is the closed form; ``simulate_fifo_queue`` replays a FIFO
single-server queue arrival by arrival (Poisson arrivals, arbitrary service
sampler) and reports the post-warm-up mean wait with a batch-means
confidence interval.  The two must agree wherever the closed form applies,
which is the main validation lever for the delay model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import kernels
from .errors import UnstableQueueError


def pk_delay(u: float, v: float, chunk_bits: float) -> float:
    """Mean M/G/1 waiting time from scaled service moments.

    ``u`` and ``v`` are the arrival-rate-weighted first and second inverse
    service-rate moments, so the load is ``chunk_bits * u`` and the mean wait
    is ``chunk_bits^2 * v / (2 * (1 - chunk_bits * u))``.  Raises when the
    queue is unstable; this function never clamps.
    """
    load = chunk_bits * u
    if load >= 1.0:
        raise UnstableQueueError(f"load {load:.4f} >= 1; mean wait undefined")
    if u < 0 or v < 0 or chunk_bits <= 0:
        raise ValueError("moments must be nonnegative and chunk_bits positive")
    return chunk_bits**2 * v / (2.0 * (1.0 - load))


@dataclass(frozen=True)
class QueueEstimate:
    mean_wait: float
    ci95: float
    n_arrivals: int

    def overlaps(self, value: float) -> bool:
        return abs(self.mean_wait - value) <= self.ci95


def batch_means_ci(values: np.ndarray, n_batches: int = 32) -> tuple[float, float]:
    """Mean and 95% half-width via non-overlapping batch means."""
    values = np.asarray(values, dtype=np.float64)
    n_batches = min(n_batches, max(2, values.size // 2))
    usable = (values.size // n_batches) * n_batches
    batches = values[:usable].reshape(n_batches, -1).mean(axis=1)
    spread = float(np.std(batches, ddof=1)) / np.sqrt(n_batches)
    half = float(stats.t.ppf(0.975, n_batches - 1)) * spread
    return float(values.mean()), half


def simulate_fifo_queue(
    arrival_rate: float,
    service_sampler,
    horizon: int,
    rng: np.random.Generator,
    warmup_fraction: float = 0.1,
    n_batches: int = 32,
) -> QueueEstimate:
    """Discrete-event FIFO queue: mean waiting time over ``horizon`` arrivals.

    ``service_sampler(rng, size)`` must return that many i.i.d. service
    times.  Waits exclude service; the first ``warmup_fraction`` of arrivals
    are discarded before averaging.
    """
    if arrival_rate <= 0:
        raise ValueError("arrival rate must be positive")
    if horizon < 100:
        raise ValueError("horizon too short for a meaningful estimate")
    interarrivals = rng.exponential(1.0 / arrival_rate, size=horizon)
    services = np.asarray(service_sampler(rng, horizon), dtype=np.float64)
    if services.shape != (horizon,):
        raise ValueError("service sampler returned wrong shape")
    waits = kernels.lindley_waits(interarrivals, services)
    start = int(warmup_fraction * horizon)
    mean, half = batch_means_ci(waits[start:], n_batches)
    return QueueEstimate(mean_wait=mean, ci95=half, n_arrivals=horizon - start)
