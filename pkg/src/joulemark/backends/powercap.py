"""Package-domain energy counters exposed by the Linux powercap sysfs tree."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from pathlib import Path

from ..errors import MalformedCounter, MismatchedRange, PathUnreadable
from ..model import MICROJOULES_PER_JOULE

DEFAULT_POWERCAP_ROOT = "/sys/class/powercap"
POWERCAP_ROOT_ENV = "JOULEMARK_POWERCAP_ROOT"
PACKAGE_DOMAIN = "intel-rapl:0"


@dataclass(frozen=True)
class CounterSnapshot:
    energy_uj: int
    max_range_uj: int
    timestamp_ns: int = 0

    def __post_init__(self):
        if self.max_range_uj <= 0:
            raise ValueError(f"max_range_uj must be positive, got {self.max_range_uj}")
        if not 0 <= self.energy_uj < self.max_range_uj:
            raise ValueError(
                f"energy_uj {self.energy_uj} outside [0, {self.max_range_uj})"
            )


def powercap_root(root=None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get(POWERCAP_ROOT_ENV, DEFAULT_POWERCAP_ROOT))


def package_domain_path(root=None) -> Path:
    return powercap_root(root) / PACKAGE_DOMAIN


def _read_int(path: Path) -> int:
    try:
        text = path.read_text()
    except OSError as exc:
        raise PathUnreadable(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return int(text.strip())
    except ValueError:
        raise MalformedCounter(f"{path}: expected an integer, got {text.strip()!r}") from None


def read_package_energy(domain_path) -> CounterSnapshot:
    """Read ``energy_uj`` and ``max_energy_range_uj`` from a RAPL domain directory."""
    domain = Path(domain_path)
    energy = _read_int(domain / "energy_uj")
    max_range = _read_int(domain / "max_energy_range_uj")
    if max_range <= 0 or not 0 <= energy < max_range:
        raise MalformedCounter(
            f"{domain}: counter {energy} inconsistent with range {max_range}"
        )
    return CounterSnapshot(energy, max_range, time.monotonic_ns())


def counter_delta_uj(before: CounterSnapshot, after: CounterSnapshot) -> int:
    if before.max_range_uj != after.max_range_uj:
        raise MismatchedRange(
            f"snapshots disagree on counter range: {before.max_range_uj} vs {after.max_range_uj}"
        )
    if after.energy_uj >= before.energy_uj:
        return after.energy_uj - before.energy_uj
    # the counter wrapped once between the two reads
    return after.energy_uj + before.max_range_uj - before.energy_uj


def counter_delta(before: CounterSnapshot, after: CounterSnapshot) -> float:
    """Energy in joules consumed between two snapshots."""
    return counter_delta_uj(before, after) / MICROJOULES_PER_JOULE


class PowercapMeter:
    """Brackets a block of work with two package-counter reads."""

    def __init__(self, root=None):
        self.domain_path = package_domain_path(root)

    def snapshot(self) -> CounterSnapshot:
        return read_package_energy(self.domain_path)

    def available(self) -> bool:
        try:
            self.snapshot()
        except (PathUnreadable, MalformedCounter):
            return False
        return True
