"""Compositions used by the CLI: measure a suite, fit groups, compare machines, classify."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import replace

from .calibration import subtract_baseline_set
from .classifier import distance_table, normalize_slopes, success_counts
from .errors import DegeneratePoints, DegenerateRanks, JoulemarkError
from .io import GroupResult, SampleRow
from .model import validate_dataset
from .orchestrator import run_problem_suite
from .profile import (
    ProfilePoint,
    classify_outliers,
    cross_machine_outliers,
    fit_profile,
    free_intercept_fit,
)


def measure_suite(manifest, config, backend, findings=()):
    """Run every problem of a manifest; return ``(measurement_sets, sample_rows)``."""
    sets, rows = [], []
    machine = manifest.machine.id
    for problem in manifest.problems:
        def keep(solution, samples, problem=problem):
            rows.extend(SampleRow(problem.problem_id, solution.solution_id, machine,
                                  config.config_tag, s) for s in samples)

        sets.append(run_problem_suite(problem, problem.solutions, config, backend,
                                      machine=machine, findings=list(findings), on_samples=keep))
    return sets, rows


def group_points(dataset) -> list:
    return [ProfilePoint.from_measurement(m) for m in dataset.measurements]


def fit_group(dataset, fit_mode="ols", baseline=None) -> tuple:
    """Fit one measurement set; return ``(GroupResult, points)``."""
    problems = validate_dataset(dataset)
    if problems:
        raise JoulemarkError(f"group {dataset.group_key} invalid: {problems}")
    if baseline is not None:
        dataset = subtract_baseline_set(dataset, baseline)
    points = group_points(dataset)
    profile = fit_profile(points, fit_mode)
    try:
        _, intercept = free_intercept_fit(points)
    except DegeneratePoints:
        intercept = None
    result = GroupResult(dataset.problem_id, dataset.machine, dataset.config_tag,
                         profile, classify_outliers(points, profile), intercept)
    return result, points


def fit_groups(datasets, fit_mode="ols", baselines=None):
    """Fit every set. ``baselines`` maps machine id to ``IdleBaseline``.

    Returns ``(results, degenerate)`` where ``degenerate`` lists the group
    keys that could not be fitted, with the reason.
    """
    baselines = baselines or {}
    results, degenerate = [], []
    for ds in datasets:
        try:
            results.append(fit_group(ds, fit_mode, baselines.get(ds.machine)))
        except (DegeneratePoints, DegenerateRanks, JoulemarkError, ValueError) as exc:
            degenerate.append((ds.group_key, str(exc)))
    return results, degenerate


def cross_machine_summary(results) -> list:
    """Cross-machine outliers for every (problem, config) fitted on 2+ machines."""
    by_key = defaultdict(dict)
    for g in results:
        by_key[(g.problem_id, g.config_tag)][g.machine] = g.outliers
    summary = []
    for (problem_id, config_tag), reports in sorted(by_key.items()):
        if len(reports) < 2:
            continue
        hits = cross_machine_outliers(dict(sorted(reports.items())))
        summary.append({
            "problem_id": problem_id,
            "config_tag": config_tag,
            "machines": sorted(reports),
            "outliers": [
                {"solution_id": h.solution_id, "tiers": h.tiers, "directions": h.directions,
                 "direction_agrees": h.direction_agrees}
                for h in hits
            ],
        })
    return summary


def classify_groups(train, test, *, n_values=None, blind=False, normalization="independent"):
    """Build the distance table for one machine.

    ``train`` and ``test`` are ``GroupResult`` lists; each test group's
    ``problem_id`` is its ground truth unless ``blind``.
    """
    train_slopes = {}
    for g in train:
        if g.problem_id in train_slopes:
            raise JoulemarkError(f"training problem {g.problem_id} appears twice; filter by config")
        train_slopes[g.problem_id] = g.profile.slope_a
    test_slopes, truth = {}, {}
    for g in test:
        test_id = f"{g.problem_id}@{g.config_tag}" if g.problem_id in test_slopes else g.problem_id
        test_slopes[test_id] = g.profile.slope_a
        if not blind:
            truth[test_id] = g.problem_id
    train_table = normalize_slopes(train_slopes)
    reference = min(train_slopes.values()) if normalization == "train-min" else None
    test_table = normalize_slopes(test_slopes, reference=reference)
    table = distance_table(train_table, test_table, truth)
    counts = None if blind else success_counts(table, n_values)
    return table, counts
