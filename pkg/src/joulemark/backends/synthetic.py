"""Deterministic simulated machine, used as a test oracle and for dry runs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..errors import UnknownInput
from ..model import RunSample
from .base import BackendKind, MeasurementBackend


@dataclass(frozen=True)
class SyntheticModel:
    """A machine drawing ``active + idle`` watts while busy and ``idle`` watts asleep.

    ``cpu_ms_per_input`` maps an input name to its simulated CPU time. Keys of
    the form ``"<solution_id>::<input>"`` override the plain input key for one
    solution, which lets a single model describe a whole problem suite.
    """

    active_power_w: float
    idle_power_w: float = 0.0
    cpu_ms_per_input: dict = field(default_factory=dict)
    noise_rel: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.active_power_w > 0:
            raise ValueError("active_power_w must be positive")
        if self.idle_power_w < 0:
            raise ValueError("idle_power_w must be nonnegative")
        if self.noise_rel < 0:
            raise ValueError("noise_rel must be nonnegative")

    def cpu_ms(self, solution_id, input_name) -> float:
        key = str(input_name)
        scoped = f"{solution_id}::{key}"
        if scoped in self.cpu_ms_per_input:
            return float(self.cpu_ms_per_input[scoped])
        if key in self.cpu_ms_per_input:
            return float(self.cpu_ms_per_input[key])
        raise UnknownInput(f"no simulated CPU time for input {key!r} (solution {solution_id!r})")


def _noise(model: SyntheticModel, solution_id, input_name, run_index) -> float:
    if model.noise_rel == 0:
        return 0.0
    # str seeds hash through sha512, so draws are stable across processes
    rng = random.Random(f"{model.seed}\x1f{solution_id}\x1f{input_name}\x1f{run_index}")
    return rng.uniform(-model.noise_rel, model.noise_rel)


def synthetic_measure(model: SyntheticModel, cmd, input_name, run_index=0) -> RunSample:
    solution_id = getattr(cmd, "solution_id", cmd)
    cpu_ms = model.cpu_ms(solution_id, input_name)
    eta = _noise(model, solution_id, input_name, run_index)
    energy = (model.active_power_w + model.idle_power_w) * cpu_ms / 1000.0 * (1.0 + eta)
    return RunSample(wall_ms=cpu_ms, cpu_ms=cpu_ms, energy_j=energy, run_index=run_index)


class SyntheticBackend(MeasurementBackend):
    """Backend over a ``SyntheticModel`` with a virtual clock.

    The clock advances by the simulated wall time of every run, so recorded
    start timestamps are reproducible.
    """

    kind = BackendKind.SYNTHETIC

    def __init__(self, model: SyntheticModel):
        self.model = model
        self._clock_ns = 0

    def measure(self, solution, inputs, run_index=0):
        inputs = list(inputs)
        if not inputs:
            raise ValueError("at least one input is required")
        parts = [synthetic_measure(self.model, solution, name, run_index) for name in inputs]
        sample = RunSample(
            wall_ms=sum(p.wall_ms for p in parts),
            cpu_ms=sum(p.cpu_ms for p in parts),
            energy_j=sum(p.energy_j for p in parts),
            run_index=run_index,
        )
        self._clock_ns += int(round(sample.wall_ms * 1e6))
        return sample

    def measure_sleep(self, duration_ms):
        self._clock_ns += int(round(duration_ms * 1e6))
        energy = self.model.idle_power_w * duration_ms / 1000.0
        return RunSample(wall_ms=float(duration_ms), cpu_ms=0.0, energy_j=energy)

    def now_ns(self):
        return self._clock_ns
