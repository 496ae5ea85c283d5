"""Power-law step-size schedules and tracking-weight diagnostics.

Three exponent presets trade optimality-gap decay against constraint
violation decay; each run uses
``alpha_t = scale * t**-alpha_exp`` for the objective step,
``delta_t = scale * t**-delta_exp`` for the penalty step, and
``beta_t = min(1, beta_scale * t**-beta_exp)`` for the tracking average.
The clamp on beta keeps the tracking updates convex combinations even
though ``beta_scale > 2`` is required for the decay regime.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, replace

import numpy as np


@dataclass(frozen=True)
class SchedulePreset:
    """Exponents and scales of one power-law schedule.

    ``gamma_exp`` and ``eta_exp`` are bookkeeping carried along with the
    preset; they never enter the iteration.
    """

    alpha_exp: float
    beta_exp: float
    delta_exp: float
    gamma_exp: float
    eta_exp: float
    step_scale: float = 1.0
    beta_scale: float = 3.0
    name: str = ""
    gap_rate: str = ""
    violation_rate: str = ""

    def __post_init__(self):
        if not (0.0 <= self.alpha_exp <= 1.0):
            raise ValueError("alpha_exp must lie in [0, 1]")
        if not (0.0 <= self.beta_exp <= 1.0):
            raise ValueError("beta_exp must lie in [0, 1]")
        if not (0.0 <= self.delta_exp <= 1.0):
            raise ValueError("delta_exp must lie in [0, 1]")
        if self.alpha_exp < self.delta_exp:
            raise ValueError("schedules require alpha_exp >= delta_exp")
        if self.step_scale < 0:
            raise ValueError("step_scale must be nonnegative")
        if self.beta_scale <= 2:
            raise ValueError("beta_scale must exceed 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SchedulePreset":
        return cls(**data)

    def with_scale(self, step_scale: float) -> "SchedulePreset":
        return replace(self, step_scale=step_scale)


def step_sizes(t: int, preset: SchedulePreset) -> tuple[float, float, float]:
    """Step sizes (alpha, beta, delta) at iteration t >= 1."""
    if t < 1:
        raise ValueError("schedules are 1-indexed; t must be >= 1")
    alpha = preset.step_scale * t ** (-preset.alpha_exp)
    beta = min(1.0, preset.beta_scale * t ** (-preset.beta_exp))
    delta = preset.step_scale * t ** (-preset.delta_exp)
    return alpha, beta, delta


_TABLE1_ROWS = (
    (0.9048, 0.5714, 0.7143, -0.0952, 1.2607, "O(T^-2/21)", "O(T^-2/21)"),
    (0.8751, 0.5714, 0.7143, -0.1429, 1.1652, "O(T^-1/7)", "O(T^-1/14)"),
    (0.7143, 0.5714, 0.7143, -0.2857, 0.8518, "O(T^-2/7)", "O(1)"),
)


def table1_presets(step_scale: float = 1.0, beta_scale: float = 3.0) -> list[SchedulePreset]:
    """The three published exponent rows, named t1-row1..t1-row3."""
    presets = []
    for idx, (a, b, c, d, e, gap, viol) in enumerate(_TABLE1_ROWS, start=1):
        presets.append(
            SchedulePreset(
                alpha_exp=a,
                beta_exp=b,
                delta_exp=c,
                gamma_exp=d,
                eta_exp=e,
                step_scale=step_scale,
                beta_scale=beta_scale,
                name=f"t1-row{idx}",
                gap_rate=gap,
                violation_rate=viol,
            )
        )
    return presets


def preset_by_name(name: str, step_scale: float = 1.0, beta_scale: float = 3.0) -> SchedulePreset:
    for preset in table1_presets(step_scale=step_scale, beta_scale=beta_scale):
        if preset.name == name:
            return preset
    known = ", ".join(p.name for p in table1_presets())
    raise KeyError(f"unknown preset {name!r}; known presets: {known}")


def zeta_weights(t: int, betas) -> np.ndarray:
    """Weights turning the tracking recursion into an explicit average.

    ``zeta_k = betas[k] * prod_{i=k+1..t} (1 - betas[i])`` for k = 0..t.
    With ``betas[0] == 1`` the weights sum to one, i.e. the recursion
    computes a proper weighted average of its inputs.
    """
    betas = np.asarray(betas, dtype=np.float64)
    if betas.size == 0:
        raise ValueError("betas must be non-empty")
    if betas.shape != (t + 1,):
        raise ValueError(f"betas must have shape ({t + 1},), got {betas.shape}")
    if np.any(betas <= 0) or np.any(betas > 1):
        raise ValueError("betas must lie in (0, 1]")
    # suffix[k] = prod_{i=k+1}^{t} (1 - betas[i])
    suffix = np.ones(t + 1)
    if t > 0:
        suffix[:-1] = np.cumprod((1.0 - betas[1:])[::-1])[::-1]
    return betas * suffix
