"""Problem identification by nearest normalized energy-profile slope."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_times
from .errors import MissingGroundTruth, NonPositiveSlope

NORMALIZATIONS = ("independent", "train-min")


@dataclass(frozen=True)
class SlopeTable:
    machine: str
    entries: dict
    normalized: dict

    @property
    def ids(self) -> list:
        return list(self.entries)


def _check_slopes(slopes):
    slopes = {str(k): float(v) for k, v in dict(slopes).items()}
    if not slopes:
        raise NonPositiveSlope("no slopes given")
    bad = [k for k, v in slopes.items() if not v > 0]
    if bad:
        raise NonPositiveSlope(f"slopes must be positive: {bad}")
    return slopes


def normalize_slopes(slopes, machine="", reference=None) -> SlopeTable:
    """Divide every slope by the smallest one (or by ``reference`` if given).

    With the default the minimum maps to exactly 1.0.
    """
    slopes = _check_slopes(slopes)
    base = min(slopes.values()) if reference is None else float(reference)
    if not base > 0:
        raise NonPositiveSlope(f"reference slope must be positive, got {base!r}")
    return SlopeTable(machine, slopes, {k: v / base for k, v in slopes.items()})


@dataclass(frozen=True)
class ClassificationTable:
    """Relative differences (%) between training rows and test columns."""

    train_ids: tuple
    test_ids: tuple
    cells: np.ndarray  # shape (len(train_ids), len(test_ids))
    truth: dict = field(default_factory=dict)  # test id -> true training id

    def column(self, test_id) -> np.ndarray:
        return self.cells[:, self.test_ids.index(test_id)]

    def cell(self, train_id, test_id) -> float:
        return float(self.cells[self.train_ids.index(train_id), self.test_ids.index(test_id)])


def relative_difference(train_value, test_value) -> float:
    """Percent difference with the training value as denominator."""
    return abs(train_value - test_value) / train_value * 100.0


def distance_table(train: SlopeTable, test: SlopeTable, truth=None) -> ClassificationTable:
    train_ids = tuple(train.normalized)
    test_ids = tuple(test.normalized)
    cells = np.empty((len(train_ids), len(test_ids)))
    for i, r in enumerate(train_ids):
        for j, c in enumerate(test_ids):
            cells[i, j] = relative_difference(train.normalized[r], test.normalized[c])
    return ClassificationTable(train_ids, test_ids, cells, dict(truth or {}))


def nearest_n(table: ClassificationTable, test_id, n) -> list:
    """The ``n`` closest training problems, ties broken by problem id."""
    if not 1 <= n <= len(table.train_ids):
        raise ValueError(f"n must lie in [1, {len(table.train_ids)}], got {n}")
    col = table.column(test_id)
    order = sorted(range(len(table.train_ids)), key=lambda i: (col[i], table.train_ids[i]))
    return [table.train_ids[i] for i in order[:n]]


def rank_of_truth(table: ClassificationTable, test_id) -> int:
    """1-based position of the true problem in the full nearest ordering."""
    truth = table.truth.get(test_id)
    if truth is None:
        raise MissingGroundTruth(f"test set {test_id!r} has no ground truth")
    return nearest_n(table, test_id, len(table.train_ids)).index(truth) + 1


def success_count(table: ClassificationTable, n) -> int:
    missing = [t for t in table.test_ids if table.truth.get(t) is None]
    if missing:
        raise MissingGroundTruth(f"test sets without ground truth: {missing}")
    return sum(1 for t in table.test_ids if table.truth[t] in nearest_n(table, t, n))


def success_counts(table: ClassificationTable, ns=None) -> dict:
    ns = range(1, len(table.train_ids) + 1) if ns is None else ns
    return {int(n): success_count(table, n) for n in ns}


class SlopeClassifier(ClassifierMixin, BaseEstimator):
    """Nearest-slope problem classifier.

    ``X`` holds one fitted profile slope per row (J/ms), ``y`` the problem
    ids. Test slopes are normalized as a batch, on their own minimum by
    default, so ``predict`` is meant for a full test batch rather than
    single slopes.

    Parameters
    ----------
    n_candidates : int, default=1
        Size of the candidate list returned by ``predict_candidates``.
    normalization : {"independent", "train-min"}, default="independent"
        ``train-min`` scales test slopes by the training minimum instead.
    """

    def __init__(self, n_candidates=1, normalization="independent"):
        self.n_candidates = n_candidates
        self.normalization = normalization

    def fit(self, X, y, machine=""):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        slopes = as_times(X)
        labels = [str(v) for v in y]
        if len(labels) != len(slopes):
            raise ValueError("X and y lengths differ")
        if len(set(labels)) != len(labels):
            raise ValueError("training problem ids must be unique")
        self.train_table_ = normalize_slopes(dict(zip(labels, slopes)), machine)
        self.classes_ = np.array(labels)
        self.n_features_in_ = 1
        return self

    def _table(self, X, truth=None) -> ClassificationTable:
        check_is_fitted(self, "train_table_")
        slopes = as_times(X)
        ids = [f"test{j}" for j in range(len(slopes))]
        reference = None
        if self.normalization == "train-min":
            reference = min(self.train_table_.entries.values())
        test = normalize_slopes(dict(zip(ids, slopes)), reference=reference)
        truth_map = {} if truth is None else dict(zip(ids, (str(t) for t in truth)))
        return distance_table(self.train_table_, test, truth_map)

    def decision_table(self, X, y=None) -> ClassificationTable:
        return self._table(X, y)

    def predict_candidates(self, X, n=None):
        n = self.n_candidates if n is None else n
        table = self._table(X)
        return [nearest_n(table, t, n) for t in table.test_ids]

    def predict(self, X):
        return np.array([c[0] for c in self.predict_candidates(X, 1)])

    def success_counts(self, X, y, ns=None) -> dict:
        return success_counts(self._table(X, y), ns)
