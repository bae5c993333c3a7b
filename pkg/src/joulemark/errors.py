"""Exception hierarchy. Every domain error derives from ``JoulemarkError``."""


class JoulemarkError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


# measurement backends
class PathUnreadable(JoulemarkError):
    pass


class MalformedCounter(JoulemarkError):
    pass


class MismatchedRange(JoulemarkError, ValueError):
    pass


class NonZeroExit(JoulemarkError):
    def __init__(self, input_index, returncode=None, message=None):
        self.input_index = input_index
        self.returncode = returncode
        super().__init__(
            message or f"command failed on input index {input_index} (exit status {returncode})"
        )


class MeasurementTimeout(JoulemarkError):
    def __init__(self, timeout_s):
        self.timeout_s = timeout_s
        super().__init__(f"wall-time cap of {timeout_s} s exceeded")


class PerfUnavailable(JoulemarkError):
    pass


class ParseFailure(JoulemarkError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownInput(JoulemarkError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


# orchestration
class TooFewSamples(JoulemarkError, ValueError):
    pass


class RunFailure(JoulemarkError):
    """A backend error annotated with the repetition it happened in."""

    def __init__(self, run_index, cause):
        self.run_index = run_index
        self.cause = cause
        super().__init__(f"run_index {run_index}: {cause}")


class PreflightBlocked(JoulemarkError):
    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__("; ".join(f.message for f in self.findings))


# calibration
class DegenerateSamples(JoulemarkError, ValueError):
    pass


class AlreadyAdjusted(JoulemarkError, ValueError):
    pass


# profile statistics
class DegeneratePoints(JoulemarkError, ValueError):
    pass


class ZeroWeightDenominator(JoulemarkError, ValueError):
    pass


class DegenerateRanks(JoulemarkError, ValueError):
    pass


class MismatchedUniverse(JoulemarkError, ValueError):
    pass


# classification
class NonPositiveSlope(JoulemarkError, ValueError):
    pass


class MissingGroundTruth(JoulemarkError, ValueError):
    pass


# dataset io
class IoFailure(JoulemarkError, OSError):
    pass


class SchemaMismatch(JoulemarkError, ValueError):
    pass
