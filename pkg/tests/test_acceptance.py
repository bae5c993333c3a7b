"""Exit criteria. Each test records one PASS/FAIL line in the terminal summary."""

import json
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from joulemark.backends import CounterSnapshot, SyntheticBackend, SyntheticModel, counter_delta_uj
from joulemark.backends.perf import parse_perf_output
from joulemark.calibration import fit_idle_slope, measure_idle, subtract_baseline_set
from joulemark.classifier import distance_table, normalize_slopes, success_count
from joulemark.cli import main
from joulemark.errors import ParseFailure
from joulemark.model import ProblemSpec, RunSample, SolutionSpec
from joulemark.orchestrator import RunConfig, run_problem_suite, trim_and_aggregate
from joulemark.profile import (
    OutlierTier,
    ProblemProfile,
    ProfilePoint,
    classify_outliers,
    fit_ols_origin,
    outlier_tier,
    residual_sd,
    spearman_rho,
)

from conftest import make_suite, write_synthetic_manifest

PERF_FIXTURES = Path(__file__).parent / "fixtures" / "perf"


def points_of(dataset):
    return [ProfilePoint.from_measurement(m) for m in dataset.measurements]


@pytest.mark.acceptance("AC1 OLS recovery: slope within 1 %, Spearman >= 0.99, < 5 s")
def test_ac1_ols_recovery(criterion):
    start = time.perf_counter()
    problem, solutions, cpu = make_suite(30, base_ms=40.0, step_ms=61.0)
    model = SyntheticModel(active_power_w=10.0, cpu_ms_per_input=cpu, noise_rel=0.02, seed=2024)
    ds = run_problem_suite(problem, solutions, RunConfig(repetitions=10), SyntheticBackend(model))
    assert all(m.kept_runs == 8 for m in ds.measurements)
    prof = fit_ols_origin(points_of(ds))
    elapsed = time.perf_counter() - start
    rel = abs(prof.slope_a - 0.01) / 0.01
    criterion(f"a={prof.slope_a:.6g} rel.err={rel:.2e} rho={prof.spearman:.4f} t={elapsed:.2f}s")
    assert rel <= 0.01
    assert prof.spearman >= 0.99
    assert elapsed < 5.0


@pytest.mark.acceptance("AC2 normalized slopes: max 1.379 +- 0.001; 1.252 vs 1.255 within 0.3 %")
def test_ac2_normalized_slopes(criterion):
    table = normalize_slopes({"1082": 0.00909, "1643": 0.01253})
    top = max(table.normalized.values())
    base = 0.00909
    pair = normalize_slopes({"min": base, "1071": 1.252 * base, "1636": 1.255 * base}).normalized
    rel = abs(pair["1636"] - pair["1071"]) / pair["1071"]
    criterion(f"max={top:.5f} pair rel.diff={rel * 100:.3f}%")
    assert min(table.normalized.values()) == 1.0
    assert abs(top - 1.379) <= 0.001
    assert rel <= 0.003


@pytest.mark.acceptance("AC3 residual SD closed form: sqrt(5) +- 1e-12")
def test_ac3_sigma_e(criterion):
    e = [1.0, -1.0, 2.0, -2.0]
    direct = residual_sd(math.fsum(x * x for x in e), len(e))
    # same residual multiset left behind by an actual fit (t chosen so sum(e*t) = 0)
    t = [1.0, 1.0, 2.0, 2.0]
    fitted = fit_ols_origin([ProfilePoint(f"s{i}", ti, 10 * ti - ei) for i, (ti, ei) in enumerate(zip(t, e))])
    criterion(f"direct={direct!r} fitted={fitted.sigma_e!r}")
    assert abs(direct - math.sqrt(5)) <= 1e-12
    assert abs(fitted.sigma_e - math.sqrt(5)) <= 1e-12


def oracle_tier(e, sigma_e, c_sd):
    """Tier by the band picture: the point's +-k*c_sd interval lies wholly outside +-2 sigma_e."""
    tier = 0
    for k in (0, 1, 2):
        lower_edge = abs(e) - k * c_sd
        if lower_edge > 2 * sigma_e:
            tier = k + 1
    return tier


@pytest.mark.acceptance("AC4 outlier tiers match brute force on 1000 triples; nesting holds")
def test_ac4_outlier_oracle(criterion):
    rng = random.Random(4)
    mismatches, nesting_broken = 0, 0
    for _ in range(1000):
        sigma_e = rng.choice([0.0, rng.uniform(0, 5)])
        c_sd = rng.choice([0.0, rng.uniform(0, 5)])
        e = rng.uniform(-20, 20)
        want = oracle_tier(e, sigma_e, c_sd)
        # route through classify_outliers with a one-point group: t = 1, a chosen so c >= 0
        a = abs(e) + 1.0
        point = ProfilePoint("x", 1.0, a - e, 0.0, c_sd)
        profile = ProblemProfile(a, 0.0, sigma_e, 1.0, 3)
        got = classify_outliers([point], profile).entries[0].tier
        if got != outlier_tier(e, sigma_e, c_sd) or int(got) != want:
            mismatches += 1
        low = abs(e) > 2 * sigma_e
        med = abs(e) > 2 * sigma_e + c_sd
        high = abs(e) > 2 * sigma_e + 2 * c_sd
        if (high and not med) or (med and not low):
            nesting_broken += 1
    criterion(f"mismatches={mismatches} nesting violations={nesting_broken}")
    assert mismatches == 0 and nesting_broken == 0


@pytest.mark.acceptance("AC5 trim rule: mean 5.5, SD sqrt(6) +- 1e-12, 8 kept")
def test_ac5_trim(criterion):
    samples = [RunSample(10.0, 10.0, float(e), i) for i, e in enumerate(range(1, 11))]
    m = trim_and_aggregate(samples)
    criterion(f"mean={m.c_mean_j!r} sd={m.c_sd_j!r} kept={m.kept_runs}")
    assert m.c_mean_j == 5.5
    assert abs(m.c_sd_j - math.sqrt(6)) <= 1e-12
    assert m.kept_runs == 8


def brute_spearman(x, y):
    n = len(x)
    rx = [sum(v < xi for v in x) + (sum(v == xi for v in x) + 1) / 2 for xi in x]
    ry = [sum(v < yi for v in y) + (sum(v == yi for v in y) + 1) / 2 for yi in y]
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry)) / n
    sx = math.sqrt(sum((a - mx) ** 2 for a in rx) / n)
    sy = math.sqrt(sum((b - my) ** 2 for b in ry) / n)
    return cov / (sx * sy)


@pytest.mark.acceptance("AC6 Spearman vs brute force on 500 datasets to 1e-12; monotone exactly +-1")
def test_ac6_spearman_oracle(criterion):
    rng = random.Random(6)
    worst, checked = 0.0, 0
    while checked < 500:
        n = rng.randint(2, 40)
        if checked % 2:
            x = [float(rng.randint(0, 5)) for _ in range(n)]  # heavy ties
            y = [float(rng.randint(0, 8)) for _ in range(n)]
        else:
            x = [rng.uniform(0, 1e4) for _ in range(n)]
            y = [rng.uniform(0, 50) for _ in range(n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        worst = max(worst, abs(spearman_rho(x, y) - brute_spearman(x, y)))
        checked += 1
    monotone_ok = True
    for _ in range(100):
        n = rng.randint(2, 60)
        x = sorted(rng.sample(range(10**6), n))
        y = sorted(rng.uniform(0, 1) for _ in range(n))
        if len(set(y)) < n:
            continue
        monotone_ok &= spearman_rho(x, y) == 1.0
        monotone_ok &= spearman_rho(x, y[::-1]) == -1.0
    criterion(f"max |diff|={worst:.1e} monotone exact={monotone_ok}")
    assert worst <= 1e-12
    assert monotone_ok


N_PROBLEMS = 15
BASE_SLOPE = 0.00909


def _measure_slope(pid, slope, n_solutions, seed, noise, tag):
    rng = random.Random(f"{seed}-{pid}-{tag}")
    solutions = [SolutionSpec(f"{pid}-{tag}{i}", f"./{tag}{i}") for i in range(n_solutions)]
    cpu = {f"{s.solution_id}::in": rng.uniform(20.0, 1500.0) for s in solutions}
    model = SyntheticModel(slope * 1000.0, 0.0, cpu, noise_rel=noise, seed=seed)
    ds = run_problem_suite(ProblemSpec(pid, ("in",)), solutions, RunConfig(repetitions=10),
                           SyntheticBackend(model))
    return fit_ols_origin(points_of(ds)).slope_a


def classification_trial(seed, noise):
    normalized = np.linspace(1.0, 1.379, N_PROBLEMS)
    truth_slopes = {f"p{k:02d}": BASE_SLOPE * v for k, v in enumerate(normalized)}
    train = {p: _measure_slope(p, a, 30, seed, noise, "train") for p, a in truth_slopes.items()}
    test = {p: _measure_slope(p, a, 10, seed, noise, "test") for p, a in truth_slopes.items()}
    table = distance_table(normalize_slopes(train), normalize_slopes(test), {p: p for p in test})
    return success_count(table, 1), success_count(table, 7)


@pytest.mark.acceptance("AC7 classification: n=1 >= 3 and n=7 = 15 in >= 90 % of 100 trials; zero noise n=1 = 15; < 30 s")
def test_ac7_classification(criterion):
    start = time.perf_counter()
    good = 0
    ones = []
    for seed in range(100):
        s1, s7 = classification_trial(seed, 0.02)
        ones.append(s1)
        good += s1 >= 3 and s7 == 15
    clean = [classification_trial(seed, 0.0)[0] for seed in (0, 1)]
    elapsed = time.perf_counter() - start
    criterion(f"trials ok={good}/100 mean n=1 successes={sum(ones) / len(ones):.1f} "
              f"zero-noise n=1={clean} t={elapsed:.1f}s")
    assert good >= 90
    assert clean == [15, 15]
    assert elapsed < 30.0


@pytest.mark.acceptance("AC8 perf parser corpus: exact values or named ParseFailure, no silent defaults")
def test_ac8_perf_corpus(criterion):
    expected = json.loads((PERF_FIXTURES / "expected.json").read_text())
    bad = []
    for name, want in sorted(expected.items()):
        text = (PERF_FIXTURES / name).read_text()
        try:
            got = parse_perf_output(text)
        except ParseFailure as exc:
            if "error" not in want or want["error"] not in str(exc):
                bad.append(f"{name}: unexpected failure {exc}")
            continue
        if "error" in want:
            bad.append(f"{name}: parsed but expected {want['error']}")
            continue
        for key in ("energy_j", "user_s", "system_s"):
            if not math.isclose(getattr(got, key), want[key], rel_tol=1e-12, abs_tol=1e-15):
                bad.append(f"{name}: {key}={getattr(got, key)} != {want[key]}")
    criterion(f"{len(expected)} fixtures, {len(bad)} wrong" + (f": {bad}" if bad else ""))
    assert not bad


@pytest.mark.acceptance("AC9 counter wraparound: 10,000 random cases incl. forced wraps")
def test_ac9_counter_wraparound(criterion):
    rng = random.Random(9)
    failures, wraps = 0, 0
    for k in range(10_000):
        modulus = rng.choice([2**32, 262143328850, rng.randint(2, 2**48)])
        before = rng.randrange(modulus)
        if k % 2:
            # forced wrap: consume past the top of the counter
            used = rng.randint(modulus - before, modulus - 1) if before > 0 else rng.randrange(modulus)
        else:
            used = rng.randrange(modulus)
        after = (before + used) % modulus
        wraps += after < before
        a, b = CounterSnapshot(before, modulus), CounterSnapshot(after, modulus)
        c = CounterSnapshot(rng.randrange(modulus), modulus)
        if counter_delta_uj(a, b) != used:
            failures += 1
        if counter_delta_uj(a, b) + counter_delta_uj(b, c) - counter_delta_uj(a, c) not in (0, modulus):
            failures += 1
    criterion(f"failures={failures} wraps exercised={wraps}")
    assert failures == 0 and wraps >= 4000


@pytest.mark.acceptance("AC10 baseline pipeline recovers 0.010 J/ms within 1e-9 relative")
def test_ac10_baseline_pipeline(criterion):
    problem, solutions, cpu = make_suite(30)
    backend = SyntheticBackend(SyntheticModel(10.0, 2.0, cpu, noise_rel=0.0, seed=1))
    baseline = fit_idle_slope(measure_idle([250, 500, 1000, 2000, 4000], backend), "synthetic")
    ds = run_problem_suite(problem, solutions, RunConfig(), backend)
    adjusted = subtract_baseline_set(ds, baseline)
    slope = fit_ols_origin(points_of(adjusted)).slope_a
    rel = abs(slope - 0.010) / 0.010
    criterion(f"idle={baseline.idle_slope_j_per_ms!r} slope={slope!r} rel.err={rel:.1e}")
    assert rel <= 1e-9


@pytest.mark.acceptance("AC11 determinism: synthetic measure is byte-identical across runs")
def test_ac11_determinism(criterion, tmp_path):
    manifest = write_synthetic_manifest(tmp_path / "suite", seed=7)
    codes = [main(["measure", str(manifest), "--backend", "synthetic", "--seed", "7",
                   "--out", str(tmp_path / name)]) for name in ("a", "b")]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("samples.csv", "measurements.json"))
    criterion(f"exit codes={codes} identical={same}")
    assert codes == [0, 0] and same
