"""``perf stat`` backend and its field-separated output parser."""

from __future__ import annotations

import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field

from ..errors import ParseFailure, PerfUnavailable, NonZeroExit
from ..model import RunSample
from .base import BackendKind, MeasurementBackend
from .systime import DEFAULT_TIMEOUT_S, _run_shell

ENERGY_EVENT = "power/energy-pkg/"
USER_EVENT = "user_time"
SYSTEM_EVENT = "system_time"
EVENTS = (ENERGY_EVENT, USER_EVENT, SYSTEM_EVENT)

# seconds per unit; perf versions differ in what they print for the tool events
TIME_UNITS = {
    "": 1.0,
    "s": 1.0,
    "sec": 1.0,
    "secs": 1.0,
    "seconds": 1.0,
    "msec": 1e-3,
    "ms": 1e-3,
    "usec": 1e-6,
    "us": 1e-6,
    "nsec": 1e-9,
    "ns": 1e-9,
}
ENERGY_UNITS = {"": 1.0, "joules": 1.0, "j": 1.0, "millijoules": 1e-3, "mj": 1e-3}


@dataclass(frozen=True)
class PerfReading:
    energy_j: float
    user_s: float
    system_s: float
    units: dict = field(default_factory=dict)


def build_perf_command(cmd: str, input_path, perf_bin="perf") -> str:
    return (
        f"{perf_bin} stat -x ';' -e {ENERGY_EVENT},{USER_EVENT},{SYSTEM_EVENT} "
        f"--all-cpus {cmd} < {shlex.quote(str(input_path))}"
    )


def _canonical_event(name: str):
    name = name.strip()
    if "energy-pkg" in name:
        return ENERGY_EVENT
    if name in (USER_EVENT, SYSTEM_EVENT):
        return name
    return None


def parse_perf_output(text: str) -> PerfReading:
    """Extract package energy and user/system time from ``perf stat -x ';'`` stderr.

    Unknown events and ``#`` comment lines are skipped, as are lines with no
    separator at all (the measured program's own stderr). A record with fewer
    than three fields is treated as truncated. Time values are normalized to
    seconds using the unit field; an unknown unit is a parse failure.
    """
    if not text or not text.strip():
        raise ParseFailure("empty perf output")

    values = {}
    units = {}
    unsupported = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or ";" not in line:
            continue
        fields = line.split(";")
        if len(fields) < 3:
            raise ParseFailure("truncated record", lineno)
        event = _canonical_event(fields[2])
        if event is None:
            continue
        value_text, unit = fields[0].strip(), fields[1].strip()
        if value_text.startswith("<"):
            unsupported[event] = (value_text, lineno)
            continue
        try:
            value = float(value_text)
        except ValueError:
            raise ParseFailure(f"non-numeric value {value_text!r} for {event}", lineno) from None
        scale_table = ENERGY_UNITS if event == ENERGY_EVENT else TIME_UNITS
        scale = scale_table.get(unit.lower())
        if scale is None:
            raise ParseFailure(f"unknown unit {unit!r} for {event}", lineno)
        # several records for one event (multi-socket) add up
        values[event] = values.get(event, 0.0) + value * scale
        units[event] = unit

    for event in EVENTS:
        if event in values:
            continue
        if event in unsupported:
            sentinel, lineno = unsupported[event]
            raise ParseFailure(f"unsupported event {event} ({sentinel})", lineno)
        raise ParseFailure(f"missing event {event}")
    return PerfReading(values[ENERGY_EVENT], values[USER_EVENT], values[SYSTEM_EVENT], units)


def perf_available(perf_bin="perf") -> bool:
    return shutil.which(perf_bin) is not None


def measure_command_perf(
    cmd, input_path, *, perf_bin="perf", timeout_s=DEFAULT_TIMEOUT_S, cwd=None, run_index=0, input_index=1
) -> RunSample:
    """One ``perf stat`` invocation against a single input."""
    if not perf_available(perf_bin):
        raise PerfUnavailable(f"{perf_bin!r} not found on PATH")
    command = build_perf_command(getattr(cmd, "command_template", cmd), input_path, perf_bin)
    t0 = time.perf_counter_ns()
    returncode, _, err = _run_shell(command, timeout_s, cwd=cwd, stderr=subprocess.PIPE)
    t1 = time.perf_counter_ns()
    text = err.decode(errors="replace")
    if returncode != 0:
        raise NonZeroExit(input_index, returncode)
    reading = parse_perf_output(text)
    return RunSample(
        wall_ms=(t1 - t0) / 1e6,
        cpu_ms=(reading.user_s + reading.system_s) * 1000.0,
        energy_j=reading.energy_j,
        run_index=run_index,
    )


def sum_samples(samples, run_index=0) -> RunSample:
    samples = list(samples)
    return RunSample(
        wall_ms=sum(s.wall_ms for s in samples),
        cpu_ms=sum(s.cpu_ms for s in samples),
        energy_j=sum(s.energy_j for s in samples),
        run_index=run_index,
    )


class PerfBackend(MeasurementBackend):
    kind = BackendKind.PERF

    def __init__(self, perf_bin="perf", timeout_s=DEFAULT_TIMEOUT_S, cwd=None):
        self.perf_bin = perf_bin
        self.timeout_s = timeout_s
        self.cwd = cwd

    def measure(self, solution, inputs, run_index=0):
        inputs = list(inputs)
        if not inputs:
            raise ValueError("at least one input is required")
        per_input = [
            measure_command_perf(
                solution,
                path,
                perf_bin=self.perf_bin,
                timeout_s=self.timeout_s,
                cwd=self.cwd,
                run_index=run_index,
                input_index=i,
            )
            for i, path in enumerate(inputs, 1)
        ]
        return sum_samples(per_input, run_index)

    def measure_sleep(self, duration_ms):
        if not perf_available(self.perf_bin):
            raise PerfUnavailable(f"{self.perf_bin!r} not found on PATH")
        command = (
            f"{self.perf_bin} stat -x ';' -e {ENERGY_EVENT},{USER_EVENT},{SYSTEM_EVENT} "
            f"--all-cpus sleep {duration_ms / 1000:.6f}"
        )
        t0 = time.perf_counter_ns()
        returncode, _, err = _run_shell(command, self.timeout_s, stderr=subprocess.PIPE)
        t1 = time.perf_counter_ns()
        if returncode != 0:
            raise NonZeroExit(1, returncode, "sleep command failed under perf")
        reading = parse_perf_output(err.decode(errors="replace"))
        return RunSample(wall_ms=(t1 - t0) / 1e6, cpu_ms=0.0, energy_j=reading.energy_j)
