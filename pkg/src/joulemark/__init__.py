"""Energy profiling of benchmark solutions: measure, fit, flag, classify."""

from .calibration import IdleBaseline, fit_idle_slope, measure_idle, subtract_baseline
from .classifier import (
    ClassificationTable,
    SlopeClassifier,
    SlopeTable,
    distance_table,
    nearest_n,
    normalize_slopes,
    success_count,
)
from .model import (
    MachineDescriptor,
    MeasurementSet,
    ProblemSpec,
    RunSample,
    SolutionMeasurement,
    SolutionSpec,
    validate_dataset,
)
from .orchestrator import RunConfig, preflight_check, run_problem_suite, run_solution, trim_and_aggregate
from .profile import (
    OriginEnergyProfile,
    OutlierReport,
    OutlierTier,
    ProblemProfile,
    ProfilePoint,
    ResidualOutlierDetector,
    classify_outliers,
    cross_machine_outliers,
    fit_ols_origin,
    fit_wls_origin,
    residuals,
    spearman,
    spearman_rho,
)

__version__ = "0.1.0"
