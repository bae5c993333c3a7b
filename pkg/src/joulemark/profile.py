"""Energy-consumption profiles: origin-constrained least squares, rank
correlation, residual-based outlier tiers, and cross-machine agreement.

Sign convention for residuals is predicted minus observed, ``e = a*t - c``,
so a negative residual means the solution used more energy than its time
predicts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_times, as_vector, check_points
from .errors import (
    DegeneratePoints,
    DegenerateRanks,
    MismatchedUniverse,
    ZeroWeightDenominator,
)

FIT_MODES = ("ols", "wls-c", "wls-tc")


@dataclass(frozen=True)
class ProfilePoint:
    solution_id: str
    t: float
    c: float
    t_sd: float = 0.0
    c_sd: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"{self.solution_id}: t must be positive, got {self.t!r}")
        if not self.c >= 0:
            raise ValueError(f"{self.solution_id}: c must be nonnegative, got {self.c!r}")
        if self.t_sd < 0 or self.c_sd < 0:
            raise ValueError(f"{self.solution_id}: standard deviations must be nonnegative")

    @classmethod
    def from_measurement(cls, m):
        return cls(m.solution_id, m.t_mean_ms, m.c_mean_j, m.t_sd_ms, m.c_sd_j)


@dataclass(frozen=True)
class ProblemProfile:
    slope_a: float
    sse: float
    sigma_e: float
    spearman: float
    n: int
    fit_mode: str = "ols"

    @property
    def diagnostic_only(self) -> bool:
        # weighted fits gave unstable slopes across flags; never use them for decisions
        return self.fit_mode != "ols"


def _columns(points):
    points = list(points)
    t = np.array([p.t for p in points], dtype=float)
    c = np.array([p.c for p in points], dtype=float)
    t_sd = np.array([p.t_sd for p in points], dtype=float)
    c_sd = np.array([p.c_sd for p in points], dtype=float)
    return points, t, c, t_sd, c_sd


# -- least squares through the origin -------------------------------------

def origin_slope(t, c, weights=None) -> float:
    """``sum(w t c) / sum(w t^2)``: the minimizer of ``sum w (a t - c)^2``."""
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    denom = math.fsum(w * t * t)
    if not denom > 0:
        raise DegeneratePoints("sum of squared times is zero")
    return math.fsum(w * t * c) / denom


def sum_squared_errors(t, c, a) -> float:
    e = a * np.asarray(t, dtype=float) - np.asarray(c, dtype=float)
    return math.fsum(e * e)


def residual_sd(sse: float, n: int) -> float:
    """``sqrt(SSE / (n - 2))``; the two-parameter divisor is kept on purpose."""
    if n < 3:
        raise DegeneratePoints(f"need at least 3 points for the residual SD, got {n}")
    return math.sqrt(sse / (n - 2))


def _fit_arrays(t, c, t_sd, c_sd, fit_mode) -> ProblemProfile:
    if fit_mode not in FIT_MODES:
        raise ValueError(f"fit_mode must be one of {FIT_MODES}, got {fit_mode!r}")
    n = len(t)
    if n < 3:
        raise DegeneratePoints(f"need at least 3 points, got {n}")
    if fit_mode == "ols":
        weights = None
    elif fit_mode == "wls-c":
        if c_sd is None or np.any(c_sd == 0):
            raise ZeroWeightDenominator("wls-c needs every energy SD to be positive")
        weights = 1.0 / c_sd
    else:
        if c_sd is None or t_sd is None or np.any(c_sd == 0) or np.any(t_sd == 0):
            raise ZeroWeightDenominator("wls-tc needs every time and energy SD to be positive")
        weights = 1.0 / (t_sd * c_sd)
    a = origin_slope(t, c, weights)
    sse = sum_squared_errors(t, c, a)
    try:
        rho = spearman_rho(t, c)
    except DegenerateRanks:
        # constant times or energies: monotonicity is undefined, not a fit failure
        rho = math.nan
    return ProblemProfile(
        slope_a=a,
        sse=sse,
        sigma_e=residual_sd(sse, n),
        spearman=rho,
        n=n,
        fit_mode=fit_mode,
    )


def fit_ols_origin(points) -> ProblemProfile:
    _, t, c, t_sd, c_sd = _columns(points)
    return _fit_arrays(t, c, t_sd, c_sd, "ols")


def fit_wls_origin(points, weight_mode="inv-csd") -> ProblemProfile:
    """Weighted fit with ``w = 1/sd_c`` (``inv-csd``) or ``w = 1/(sd_t sd_c)`` (``inv-tsd-csd``)."""
    modes = {"inv-csd": "wls-c", "inv-tsd-csd": "wls-tc", "wls-c": "wls-c", "wls-tc": "wls-tc"}
    if weight_mode not in modes:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    _, t, c, t_sd, c_sd = _columns(points)
    return _fit_arrays(t, c, t_sd, c_sd, modes[weight_mode])


def fit_profile(points, fit_mode="ols") -> ProblemProfile:
    _, t, c, t_sd, c_sd = _columns(points)
    return _fit_arrays(t, c, t_sd, c_sd, fit_mode)


def residuals(points, a) -> list:
    return [a * p.t - p.c for p in points]


def free_intercept_fit(points):
    """Ordinary ``c = a t + b`` fit, kept as a diagnostic only.

    The intercept swings in sign between problems on the same machine, so
    it is never used as the idle baseline.
    """
    _, t, c, _, _ = _columns(points)
    if len(t) < 2 or np.all(t == t[0]):
        raise DegeneratePoints("free-intercept fit needs two distinct times")
    slope, intercept = np.polyfit(t, c, 1)
    return float(slope), float(intercept)


# -- rank correlation ------------------------------------------------------

def _doubled_average_ranks(values) -> list:
    """Average ranks (1-based) times two, so ties stay integral."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0] * n
    i = 0
    while i < n:
        j = i + 1
        while j < n and values[order[j]] == values[order[i]]:
            j += 1
        # positions i..j-1 share the mean of ranks i+1..j
        for k in range(i, j):
            ranks[order[k]] = i + 1 + j
        i = j
    return ranks


def average_ranks(values) -> np.ndarray:
    return np.array(_doubled_average_ranks(list(values)), dtype=float) / 2.0


def spearman_rho(x, y) -> float:
    """Rank covariance over the product of rank standard deviations.

    Computed in integer arithmetic on doubled ranks, so perfectly monotone
    data gives exactly 1 or -1.
    """
    x = [float(v) for v in as_vector(x, "x")]
    y = [float(v) for v in as_vector(y, "y")]
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise DegenerateRanks(f"need at least 2 points, got {n}")
    r = _doubled_average_ranks(x)
    s = _doubled_average_ranks(y)
    sr, ss = sum(r), sum(s)
    num = n * sum(a * b for a, b in zip(r, s)) - sr * ss
    vr = n * sum(a * a for a in r) - sr * sr
    vs = n * sum(b * b for b in s) - ss * ss
    if vr == 0 or vs == 0:
        raise DegenerateRanks("all times or all energies are equal")
    rho = num / vr if vr == vs else num / math.sqrt(vr * vs)
    return max(-1.0, min(1.0, rho))


def spearman(points) -> float:
    _, t, c, _, _ = _columns(points)
    return spearman_rho(t, c)


# -- outliers --------------------------------------------------------------

class OutlierTier(enum.IntEnum):
    NONE = 0
    LOW = 1
    MEDIUM = 2
    HIGH = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label):
        return cls[str(label).upper()]


def outlier_tier(residual, sigma_e, c_sd) -> OutlierTier:
    e = abs(residual)
    if e > 2 * sigma_e + 2 * c_sd:
        return OutlierTier.HIGH
    if e > 2 * sigma_e + c_sd:
        return OutlierTier.MEDIUM
    if e > 2 * sigma_e:
        return OutlierTier.LOW
    return OutlierTier.NONE


@dataclass(frozen=True)
class OutlierEntry:
    solution_id: str
    residual: float
    tier: OutlierTier
    low_threshold: float
    medium_threshold: float
    high_threshold: float
    direction: str  # "above": more energy than predicted


@dataclass(frozen=True)
class OutlierReport:
    slope_a: float
    sigma_e: float
    entries: tuple = ()

    def by_solution(self) -> dict:
        return {e.solution_id: e for e in self.entries}

    def counts(self) -> dict:
        out = {t.label: 0 for t in OutlierTier}
        for e in self.entries:
            out[e.tier.label] += 1
        return out


def classify_outliers(points, profile: ProblemProfile) -> OutlierReport:
    entries = []
    two_se = 2 * profile.sigma_e
    for p in points:
        e = profile.slope_a * p.t - p.c
        entries.append(OutlierEntry(
            solution_id=p.solution_id,
            residual=e,
            tier=outlier_tier(e, profile.sigma_e, p.c_sd),
            low_threshold=two_se,
            medium_threshold=two_se + p.c_sd,
            high_threshold=two_se + 2 * p.c_sd,
            direction="above" if p.c > profile.slope_a * p.t else "below",
        ))
    return OutlierReport(profile.slope_a, profile.sigma_e, tuple(entries))


@dataclass(frozen=True)
class CrossMachineOutlier:
    solution_id: str
    tiers: dict = field(default_factory=dict)
    directions: dict = field(default_factory=dict)

    @property
    def direction_agrees(self) -> bool:
        return len(set(self.directions.values())) == 1


def cross_machine_outliers(reports) -> list:
    """Solutions that are outliers on every machine and at least medium on one."""
    if len(reports) < 2:
        raise MismatchedUniverse(f"need reports from at least 2 machines, got {len(reports)}")
    tables = {machine: r.by_solution() for machine, r in reports.items()}
    universes = {machine: frozenset(t) for machine, t in tables.items()}
    first = next(iter(universes.values()))
    for machine, universe in universes.items():
        if universe != first:
            diff = sorted(universe.symmetric_difference(first))
            raise MismatchedUniverse(f"machine {machine} covers different solutions: {diff[:5]}")

    hits = []
    for sid in sorted(first):
        tiers = {m: tables[m][sid].tier for m in tables}
        if min(tiers.values()) >= OutlierTier.LOW and max(tiers.values()) >= OutlierTier.MEDIUM:
            hits.append(CrossMachineOutlier(
                sid,
                {m: t.label for m, t in tiers.items()},
                {m: tables[m][sid].direction for m in tables},
            ))
    return hits


# -- estimator API ---------------------------------------------------------

class OriginEnergyProfile(RegressorMixin, BaseEstimator):
    """Fits ``energy = slope * time`` with the line pinned at the origin.

    Parameters
    ----------
    fit_mode : {"ols", "wls-c", "wls-tc"}, default="ols"
        Ordinary least squares, or weighted by ``1/c_sd`` or
        ``1/(t_sd * c_sd)``. Weighted modes are diagnostic only.

    Attributes
    ----------
    slope_ : float
        Joules per millisecond.
    sigma_e_ : float
        Residual standard deviation, ``sqrt(SSE / (n - 2))``.
    spearman_ : float
    profile_ : ProblemProfile
    """

    def __init__(self, fit_mode="ols"):
        self.fit_mode = fit_mode

    def fit(self, X, y, t_sd=None, c_sd=None):
        t, c, t_sd, c_sd = check_points(X, y, t_sd, c_sd, min_points=3)
        self.profile_ = _fit_arrays(t, c, t_sd, c_sd, self.fit_mode)
        self.slope_ = self.profile_.slope_a
        self.sse_ = self.profile_.sse
        self.sigma_e_ = self.profile_.sigma_e
        self.spearman_ = self.profile_.spearman
        self.n_points_ = self.profile_.n
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        return self.slope_ * as_times(X)

    def residuals(self, X, y):
        """Predicted minus observed energy."""
        return self.predict(X) - as_vector(y)


class ResidualOutlierDetector(BaseEstimator):
    """Three-tier outlier labelling around an origin-constrained fit.

    ``fit_predict`` returns tier labels (``none``/``low``/``medium``/``high``).
    Time spread is ignored in the thresholds; only ``c_sd`` widens them.
    """

    def __init__(self, fit_mode="ols"):
        self.fit_mode = fit_mode

    def fit(self, X, y, c_sd=None, t_sd=None):
        t, c, t_sd, c_sd = check_points(X, y, t_sd, c_sd, min_points=3)
        if c_sd is None:
            c_sd = np.zeros_like(t)
        self.profile_ = _fit_arrays(t, c, t_sd, c_sd, self.fit_mode)
        e = self.profile_.slope_a * t - c
        self.residuals_ = e
        self.tiers_ = np.array(
            [outlier_tier(ei, self.profile_.sigma_e, si).label for ei, si in zip(e, c_sd)]
        )
        return self

    def fit_predict(self, X, y, c_sd=None, t_sd=None):
        return self.fit(X, y, c_sd=c_sd, t_sd=t_sd).tiers_
