"""Shared domain records.

All records are frozen dataclasses. Units are fixed across the package:
time in milliseconds, energy in joules, and every spread is a standard
deviation (never a variance).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

MICROJOULES_PER_JOULE = 1_000_000


@dataclass(frozen=True)
class MachineDescriptor:
    id: str
    cpu_label: str = ""
    core_count: int = 1
    notes: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValueError("machine id must be nonempty")
        if int(self.core_count) < 1:
            raise ValueError(f"core_count must be positive, got {self.core_count!r}")


@dataclass(frozen=True)
class SolutionSpec:
    """One program under test.

    ``command_template`` is a shell fragment (``./a.out``, ``java Main``);
    the input file is always fed through standard-input redirection.
    ``server_time_ms`` and ``tags`` carry optional selection metadata
    (judge-reported time, dataset membership such as ``Rand30``).
    """

    solution_id: str
    command_template: str
    language_tag: str = ""
    flag_tag: str = ""
    server_time_ms: Optional[float] = None
    tags: tuple = ()

    def __post_init__(self):
        if not self.command_template or not self.command_template.strip():
            raise ValueError(f"solution {self.solution_id!r}: command_template is empty")
        object.__setattr__(self, "tags", tuple(self.tags))


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: str
    input_paths: tuple
    category: str = ""
    solutions: tuple = ()

    def __post_init__(self):
        paths = tuple(str(p) for p in self.input_paths)
        if not paths:
            raise ValueError(f"problem {self.problem_id!r}: input_paths is empty")
        if len(set(paths)) != len(paths):
            raise ValueError(f"problem {self.problem_id!r}: input_paths are not distinct")
        object.__setattr__(self, "input_paths", paths)
        object.__setattr__(self, "solutions", tuple(self.solutions))


@dataclass(frozen=True)
class RunSample:
    wall_ms: float
    cpu_ms: float
    energy_j: float
    run_index: int = 0

    def __post_init__(self):
        for name in ("wall_ms", "cpu_ms", "energy_j"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"RunSample.{name} must be finite and nonnegative, got {value!r}")
        if self.run_index < 0:
            raise ValueError(f"run_index must be nonnegative, got {self.run_index!r}")


@dataclass(frozen=True)
class SolutionMeasurement:
    """Trimmed aggregate of one solution's repetitions.

    ``t_mean_ms`` is CPU time, the time used for fitting. Wall time is kept
    alongside because idle-baseline removal scales with elapsed time.
    """

    solution_id: str
    t_mean_ms: float
    c_mean_j: float
    t_sd_ms: float
    c_sd_j: float
    kept_runs: int
    baseline_adjusted: bool = False
    wall_mean_ms: Optional[float] = None
    wall_sd_ms: Optional[float] = None
    started_ns: Optional[int] = None


@dataclass(frozen=True)
class MeasurementSet:
    machine: str
    problem_id: str
    config_tag: str
    measurements: tuple = ()
    failures: tuple = ()  # (solution_id, message) pairs; nonempty means partial

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        object.__setattr__(self, "failures", tuple(tuple(f) for f in self.failures))

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    @property
    def group_key(self) -> tuple:
        return (self.problem_id, self.machine, self.config_tag)


def _is_finite(x) -> bool:
    return x is not None and isinstance(x, (int, float)) and math.isfinite(x)


def validate_dataset(dataset: MeasurementSet) -> list:
    """Return one description per invariant violation; empty when valid.

    The result is sorted so it does not depend on measurement order.
    """
    problems = []
    counts = Counter(m.solution_id for m in dataset.measurements)
    for sid, count in counts.items():
        if count > 1:
            problems.append(f"duplicate solution_id: {sid}")
    for m in dataset.measurements:
        sid = m.solution_id
        if not sid:
            problems.append("empty solution_id")
        for name in ("t_mean_ms", "c_mean_j", "t_sd_ms", "c_sd_j"):
            value = getattr(m, name)
            if not _is_finite(value):
                problems.append(f"non-finite {name}: {sid} ({value!r})")
            elif value < 0:
                kind = "standard deviation" if name.endswith("_sd_ms") or name.endswith("_sd_j") else "mean"
                problems.append(f"negative {kind}: {sid} ({name}={value!r})")
        if not isinstance(m.kept_runs, int) or m.kept_runs < 1:
            problems.append(f"kept_runs below 1: {sid} ({m.kept_runs!r})")
        for name in ("wall_mean_ms", "wall_sd_ms"):
            value = getattr(m, name)
            if value is not None and (not _is_finite(value) or value < 0):
                problems.append(f"invalid {name}: {sid} ({value!r})")
    return sorted(problems)
