"""Idle-energy baseline: estimate it from sleep runs, remove it before fitting."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import AlreadyAdjusted, DegenerateSamples, DegeneratePoints
from .model import SolutionMeasurement
from .profile import origin_slope, sum_squared_errors

log = logging.getLogger(__name__)


class BaselineClampWarning(UserWarning):
    """Measured energy fell below the idle baseline and was clamped to zero."""


@dataclass(frozen=True)
class IdleBaseline:
    machine: str
    idle_slope_j_per_ms: float
    sample_count: int
    fit_residual_sd: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.idle_slope_j_per_ms) or self.idle_slope_j_per_ms < 0:
            raise ValueError(f"idle slope must be finite and nonnegative, got {self.idle_slope_j_per_ms!r}")


def measure_idle(durations_ms, backend) -> list:
    """Energy of one sleep per duration, as ``[(duration_ms, energy_j), ...]``."""
    durations = [float(d) for d in durations_ms]
    if len(set(durations)) < 2:
        raise ValueError("need at least two distinct sleep durations")
    if any(d <= 0 for d in durations):
        raise ValueError("sleep durations must be positive")
    return [(d, backend.measure_sleep(d).energy_j) for d in durations]


def fit_idle_slope(samples, machine="local") -> IdleBaseline:
    """Least-squares slope through the origin of energy against sleep length."""
    samples = list(samples)
    if len(samples) < 2:
        raise DegenerateSamples(f"need at least 2 idle samples, got {len(samples)}")
    d = np.array([s[0] for s in samples], dtype=float)
    e = np.array([s[1] for s in samples], dtype=float)
    if np.all(d == d[0]):
        raise DegenerateSamples("all sleep durations are equal")
    try:
        slope = origin_slope(d, e)
    except DegeneratePoints as exc:
        raise DegenerateSamples(str(exc)) from None
    if slope < 0:
        log.warning("negative idle slope %g clamped to 0", slope)
        slope = 0.0
    sse = sum_squared_errors(d, e, slope)
    resid_sd = math.sqrt(sse / (len(samples) - 1)) if len(samples) > 1 else 0.0
    return IdleBaseline(machine, slope, len(samples), resid_sd)


def subtract_baseline(m: SolutionMeasurement, baseline: IdleBaseline) -> SolutionMeasurement:
    """Remove idle energy for the run's elapsed (wall) time.

    Idle power burns for the full wall duration, so the baseline scales with
    wall time, falling back to CPU time when no wall mean was recorded.
    """
    if m.baseline_adjusted:
        raise AlreadyAdjusted(f"{m.solution_id}: baseline already subtracted")
    elapsed = m.wall_mean_ms if m.wall_mean_ms is not None else m.t_mean_ms
    adjusted = m.c_mean_j - baseline.idle_slope_j_per_ms * elapsed
    if adjusted < 0:
        warnings.warn(
            f"{m.solution_id}: energy {m.c_mean_j:.6g} J below idle baseline, clamped to 0",
            BaselineClampWarning,
            stacklevel=2,
        )
        adjusted = 0.0
    return replace(m, c_mean_j=adjusted, baseline_adjusted=True)


def subtract_baseline_set(dataset, baseline: IdleBaseline):
    return replace(dataset, measurements=tuple(subtract_baseline(m, baseline) for m in dataset.measurements))
