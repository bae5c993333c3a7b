"""Measurement protocol: preflight, repeated runs, trimming, suites."""

from __future__ import annotations

import logging
import math
import resource
from dataclasses import dataclass, replace
from pathlib import Path

from .backends.base import BackendKind
from .backends.perf import perf_available
from .backends.powercap import PowercapMeter
from .errors import JoulemarkError, PreflightBlocked, RunFailure, TooFewSamples
from .model import MeasurementSet, SolutionMeasurement

log = logging.getLogger(__name__)

TRIMMED_PER_SIDE = 1
CPU_WALL_GAP_MS = 10.0
DEFAULT_CPU_SYSFS = "/sys/devices/system/cpu"


@dataclass(frozen=True)
class RunConfig:
    repetitions: int = 10
    trim_policy: str = "drop-max-min-energy"
    backend: BackendKind = BackendKind.SYNTHETIC
    single_core: bool = False
    flag_tag: str = ""
    timeout_s: float = 60.0
    require_unlimited_stack: bool = False

    def __post_init__(self):
        object.__setattr__(self, "backend", BackendKind(self.backend))
        if self.trim_policy != "drop-max-min-energy":
            raise ValueError(f"unknown trim policy {self.trim_policy!r}")
        if self.repetitions < 2 * TRIMMED_PER_SIDE + 1:
            raise ValueError(
                f"repetitions must be at least 3 so trimming leaves a sample, got {self.repetitions}"
            )

    @property
    def config_tag(self) -> str:
        cores = "single" if self.single_core else "multi"
        return f"{self.flag_tag or 'default'}/{cores}/{self.backend.value}"


@dataclass(frozen=True)
class Finding:
    severity: str  # "blocker" or "advisory"
    code: str
    message: str
    commands: tuple = ()

    @property
    def blocking(self) -> bool:
        return self.severity == "blocker"


def parse_cpu_list(text: str) -> list:
    """Expand a sysfs CPU list such as ``0-2,4`` into ``[0, 1, 2, 4]``."""
    cpus = []
    for part in text.strip().split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-")
            cpus.extend(range(int(lo), int(hi) + 1))
        else:
            cpus.append(int(part))
    return cpus


def preflight_check(config: RunConfig, *, powercap_root=None, cpu_sysfs=None,
                    stack_limit=None, perf_bin="perf") -> list:
    """Inspect the machine and report what stands in the way of a clean run.

    Nothing is changed on the system; fixes are reported as commands for the
    operator. ``stack_limit`` overrides the probed soft ``RLIMIT_STACK``.
    """
    findings = []
    cpu_sysfs = DEFAULT_CPU_SYSFS if cpu_sysfs is None else cpu_sysfs
    real = config.backend is not BackendKind.SYNTHETIC

    soft = resource.getrlimit(resource.RLIMIT_STACK)[0] if stack_limit is None else stack_limit
    if real and soft != resource.RLIM_INFINITY:
        findings.append(Finding(
            "blocker" if config.require_unlimited_stack else "advisory",
            "stack-limit",
            f"stack size soft limit is {soft} bytes, not unlimited",
            ("ulimit -s unlimited",),
        ))

    # the core mask is checked for every backend: it describes the requested setup
    if config.single_core:
        online_file = Path(cpu_sysfs) / "online"
        try:
            online = parse_cpu_list(online_file.read_text())
        except (OSError, ValueError):
            findings.append(Finding("advisory", "cores-unknown", f"cannot read {online_file}"))
        else:
            extra = [c for c in online if c != 0]
            if extra:
                findings.append(Finding(
                    "advisory",
                    "cores-online",
                    f"single-core run requested but {len(online)} cores are online",
                    tuple(f"echo 0 > {cpu_sysfs}/cpu{n}/online" for n in extra),
                ))

    if config.backend is BackendKind.POWERCAP_SYSTIME:
        meter = PowercapMeter(powercap_root)
        if not meter.available():
            findings.append(Finding(
                "blocker", "energy-counter", f"energy counter unreadable at {meter.domain_path}"
            ))
    elif config.backend is BackendKind.PERF:
        if not perf_available(perf_bin):
            findings.append(Finding("blocker", "perf-missing", f"{perf_bin!r} not found on PATH"))
    return findings


def run_solution(solution, problem, config: RunConfig, backend) -> list:
    """Run ``config.repetitions`` back-to-back repetitions over all inputs."""
    samples = []
    for run_index in range(config.repetitions):
        try:
            samples.append(backend.measure(solution, problem.input_paths, run_index))
        except JoulemarkError as exc:
            raise RunFailure(run_index, exc) from exc
    return samples


def _mean_sd(values):
    mean = math.fsum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1))
    return mean, sd


def trim_and_aggregate(samples, solution_id="") -> SolutionMeasurement:
    """Drop the highest- and lowest-energy runs and summarize the rest.

    On equal energies the run with the lower ``run_index`` is the one dropped.
    Standard deviations use the ``n - 1`` divisor.
    """
    samples = list(samples)
    if len(samples) < 2 * TRIMMED_PER_SIDE + 1:
        raise TooFewSamples(f"need at least 3 samples to trim, got {len(samples)}")
    by_index = sorted(samples, key=lambda s: s.run_index)
    drop_max = max(by_index, key=lambda s: (s.energy_j, -s.run_index))
    rest = [s for s in by_index if s is not drop_max]
    drop_min = min(rest, key=lambda s: (s.energy_j, s.run_index))
    kept = [s for s in rest if s is not drop_min]

    t_mean, t_sd = _mean_sd([s.cpu_ms for s in kept])
    c_mean, c_sd = _mean_sd([s.energy_j for s in kept])
    w_mean, w_sd = _mean_sd([s.wall_ms for s in kept])
    return SolutionMeasurement(
        solution_id=solution_id,
        t_mean_ms=t_mean,
        c_mean_j=c_mean,
        t_sd_ms=t_sd,
        c_sd_j=c_sd,
        kept_runs=len(kept),
        wall_mean_ms=w_mean,
        wall_sd_ms=w_sd,
    )


def run_problem_suite(problem, solutions, config: RunConfig, backend, machine="local",
                      findings=None, on_samples=None) -> MeasurementSet:
    """Measure every solution of one problem in the given order.

    A failing solution is recorded in ``MeasurementSet.failures`` and the
    suite moves on. ``on_samples(solution, samples)`` sees raw samples of
    every successful solution.
    """
    if findings is None:
        findings = preflight_check(config)
    blockers = [f for f in findings if f.blocking]
    if blockers:
        raise PreflightBlocked(blockers)

    measurements, failures = [], []
    for solution in solutions:
        started = backend.now_ns()
        try:
            samples = run_solution(solution, problem, config, backend)
        except RunFailure as exc:
            log.warning("solution %s failed: %s", solution.solution_id, exc)
            failures.append((solution.solution_id, str(exc)))
            continue
        if on_samples is not None:
            on_samples(solution, samples)
        m = trim_and_aggregate(samples, solution.solution_id)
        measurements.append(replace(m, started_ns=started))
    return MeasurementSet(machine, problem.problem_id, config.config_tag, measurements, failures)


def cpu_wall_discrepancies(samples, threshold_ms=CPU_WALL_GAP_MS) -> list:
    """Samples whose wall and CPU times differ by more than ``threshold_ms``."""
    return [s for s in samples if abs(s.wall_ms - s.cpu_ms) > threshold_ms]
