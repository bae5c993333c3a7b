from .base import BackendKind, MeasurementBackend
from .perf import PerfBackend, PerfReading, build_perf_command, measure_command_perf, parse_perf_output
from .powercap import (
    CounterSnapshot,
    PowercapMeter,
    counter_delta,
    counter_delta_uj,
    package_domain_path,
    read_package_energy,
)
from .synthetic import SyntheticBackend, SyntheticModel, synthetic_measure
from .systime import SystimeBackend, cpu_chain_command, measure_command_systime, wall_chain_command

__all__ = [
    "BackendKind",
    "CounterSnapshot",
    "MeasurementBackend",
    "PerfBackend",
    "PerfReading",
    "PowercapMeter",
    "SyntheticBackend",
    "SyntheticModel",
    "SystimeBackend",
    "build_perf_command",
    "counter_delta",
    "counter_delta_uj",
    "cpu_chain_command",
    "make_backend",
    "measure_command_perf",
    "measure_command_systime",
    "package_domain_path",
    "parse_perf_output",
    "read_package_energy",
    "synthetic_measure",
    "wall_chain_command",
]


def make_backend(kind, *, synthetic_model=None, powercap_root=None, timeout_s=60.0, cwd=None, perf_bin="perf"):
    kind = BackendKind(kind)
    if kind is BackendKind.SYNTHETIC:
        if synthetic_model is None:
            raise ValueError("the synthetic backend needs a SyntheticModel")
        return SyntheticBackend(synthetic_model)
    if kind is BackendKind.PERF:
        return PerfBackend(perf_bin=perf_bin, timeout_s=timeout_s, cwd=cwd)
    return SystimeBackend(powercap_root=powercap_root, timeout_s=timeout_s, cwd=cwd)
