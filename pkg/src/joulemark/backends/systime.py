"""Shell-chain timing backend.

Every repetition is a single ``bash -c`` call that runs the solution once
per input, chained with ``&&``. Each link is wrapped in the shell's
``time`` keyword and its report appended to a scratch file, which gives
user and system CPU time per input. Energy comes from package-counter
reads bracketing the whole chain.
"""

from __future__ import annotations

import os
import re
import shlex
import signal
import subprocess
import tempfile
import time
from pathlib import Path

from ..errors import MeasurementTimeout, NonZeroExit, ParseFailure
from ..model import RunSample
from .base import BackendKind, MeasurementBackend
from .powercap import PowercapMeter, counter_delta

DEFAULT_TIMEOUT_S = 60.0
DISCARD = "> /dev/null 2>&1"

_TIME_LINE = re.compile(r"^(real|user|sys)\s+(?:(\d+)m)?(\d+(?:[.,]\d*)?)s?\s*$")


def _link(cmd: str, input_path, discard_output: bool) -> str:
    link = f"{cmd} < {shlex.quote(str(input_path))}"
    return f"{link} {DISCARD}" if discard_output else link


def wall_chain_command(cmd: str, inputs, discard_output=True) -> str:
    """``<cmd> < <input> > /dev/null 2>&1`` per input, joined by ``&&``."""
    return " && ".join(_link(cmd, p, discard_output) for p in inputs)


def cpu_chain_command(cmd: str, inputs, tmpfile, discard_output=True) -> str:
    """Same chain with every link wrapped in ``{ time ...; } 2>> <tmpfile>``."""
    tmp = shlex.quote(str(tmpfile))
    return " && ".join(
        f"{{ time {_link(cmd, p, discard_output)}; }} 2>> {tmp}" for p in inputs
    )


def parse_time_reports(text: str) -> list:
    """Parse appended ``time`` reports into ``[(real_s, user_s, sys_s), ...]``.

    Lines that are not part of a report (program stderr when output is not
    discarded) are ignored.
    """
    reports = []
    current = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        match = _TIME_LINE.match(raw.strip())
        if not match:
            continue
        key, minutes, seconds = match.groups()
        value = int(minutes or 0) * 60 + float(seconds.replace(",", "."))
        if key in current:
            raise ParseFailure(f"repeated '{key}' inside one time report", lineno)
        current[key] = value
        if len(current) == 3:
            reports.append((current["real"], current["user"], current["sys"]))
            current = {}
    if current:
        raise ParseFailure("truncated time report at end of output")
    return reports


def _run_shell(command, timeout_s, cwd=None, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL):
    proc = subprocess.Popen(
        ["bash", "-c", command],
        cwd=cwd,
        stdin=subprocess.DEVNULL,
        stdout=stdout,
        stderr=stderr,
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.communicate()
        raise MeasurementTimeout(timeout_s) from None
    return proc.returncode, out, err


def measure_command_systime(
    cmd,
    inputs,
    discard_output=True,
    *,
    meter=None,
    timeout_s=DEFAULT_TIMEOUT_S,
    cwd=None,
    run_index=0,
) -> RunSample:
    """Run the chain once and return wall time, CPU time and package energy.

    ``cmd`` is a ``SolutionSpec`` or a bare command string. ``NonZeroExit``
    carries the 1-based position of the input whose run failed.
    """
    command = getattr(cmd, "command_template", cmd)
    inputs = list(inputs)
    if not inputs:
        raise ValueError("at least one input is required")
    meter = meter if meter is not None else PowercapMeter()

    fd, tmpname = tempfile.mkstemp(prefix="joulemark-time-")
    os.close(fd)
    try:
        chain = cpu_chain_command(command, inputs, tmpname, discard_output)
        before = meter.snapshot()
        t0 = time.perf_counter_ns()
        returncode, _, _ = _run_shell(chain, timeout_s, cwd=cwd)
        t1 = time.perf_counter_ns()
        after = meter.snapshot()
        reports = parse_time_reports(Path(tmpname).read_text())
    finally:
        os.unlink(tmpname)

    if returncode != 0:
        # the failing link still appends its own report before the chain stops
        raise NonZeroExit(max(len(reports), 1), returncode)
    if len(reports) != len(inputs):
        raise ParseFailure(f"expected {len(inputs)} time reports, found {len(reports)}")
    cpu_s = sum(user + sys_ for _, user, sys_ in reports)
    return RunSample(
        wall_ms=(t1 - t0) / 1e6,
        cpu_ms=cpu_s * 1000.0,
        energy_j=counter_delta(before, after),
        run_index=run_index,
    )


class SystimeBackend(MeasurementBackend):
    kind = BackendKind.POWERCAP_SYSTIME

    def __init__(self, powercap_root=None, timeout_s=DEFAULT_TIMEOUT_S, cwd=None, discard_output=True):
        self.meter = PowercapMeter(powercap_root)
        self.timeout_s = timeout_s
        self.cwd = cwd
        self.discard_output = discard_output

    def measure(self, solution, inputs, run_index=0):
        return measure_command_systime(
            solution,
            inputs,
            self.discard_output,
            meter=self.meter,
            timeout_s=self.timeout_s,
            cwd=self.cwd,
            run_index=run_index,
        )

    def measure_sleep(self, duration_ms):
        before = self.meter.snapshot()
        t0 = time.perf_counter_ns()
        returncode, _, _ = _run_shell(f"sleep {duration_ms / 1000:.6f}", self.timeout_s)
        t1 = time.perf_counter_ns()
        after = self.meter.snapshot()
        if returncode != 0:
            raise NonZeroExit(1, returncode, "sleep command failed")
        return RunSample(wall_ms=(t1 - t0) / 1e6, cpu_ms=0.0, energy_j=counter_delta(before, after))
