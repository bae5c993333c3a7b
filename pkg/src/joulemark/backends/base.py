from __future__ import annotations

import enum
import time


class BackendKind(str, enum.Enum):
    POWERCAP_SYSTIME = "powercap-systime"
    PERF = "perf"
    SYNTHETIC = "synthetic"


class MeasurementBackend:
    """Executes one repetition of a solution over all of its inputs.

    Backends are used strictly sequentially and need not be reentrant.
    """

    kind: BackendKind

    def measure(self, solution, inputs, run_index=0):
        raise NotImplementedError

    def measure_sleep(self, duration_ms):
        """Energy sample for an idle sleep of ``duration_ms``."""
        raise NotImplementedError

    def now_ns(self) -> int:
        return time.time_ns()
