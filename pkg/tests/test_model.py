import math

import pytest
from hypothesis import given, strategies as st

from joulemark.model import (
    MachineDescriptor,
    MeasurementSet,
    ProblemSpec,
    RunSample,
    SolutionMeasurement,
    SolutionSpec,
    validate_dataset,
)


def meas(sid, t=100.0, c=1.0, t_sd=0.5, c_sd=0.01, kept=8):
    return SolutionMeasurement(sid, t, c, t_sd, c_sd, kept)


def test_duplicate_solution_id():
    ms = MeasurementSet("m", "p", "cfg", [meas("s1"), meas("s1"), meas("s2")])
    assert validate_dataset(ms) == ["duplicate solution_id: s1"]


def test_well_formed_set_is_clean():
    ms = MeasurementSet("m", "p", "cfg", [meas(f"s{i}", t=10.0 + i) for i in range(30)])
    assert validate_dataset(ms) == []


def test_negative_sd_reported_with_id():
    ms = MeasurementSet("m", "p", "cfg", [meas("s1", c_sd=-1.0)])
    [msg] = validate_dataset(ms)
    assert msg.startswith("negative standard deviation: s1")


def test_other_violations():
    ms = MeasurementSet("m", "p", "cfg", [meas("a", kept=0), meas("b", t=math.nan)])
    out = validate_dataset(ms)
    assert any("kept_runs" in v and "a" in v for v in out)
    assert any("non-finite t_mean_ms: b" in v for v in out)


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=8),
       st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.randoms())
def test_validate_idempotent_and_order_independent(ids, sds, rnd):
    ms = [meas(sid, c_sd=sd) for sid, sd in zip(ids, sds)]
    first = validate_dataset(MeasurementSet("m", "p", "c", ms))
    assert validate_dataset(MeasurementSet("m", "p", "c", ms)) == first
    rnd.shuffle(ms)
    assert validate_dataset(MeasurementSet("m", "p", "c", ms)) == first


@pytest.mark.parametrize("kwargs", [
    dict(wall_ms=-1.0, cpu_ms=0.0, energy_j=0.0),
    dict(wall_ms=1.0, cpu_ms=math.inf, energy_j=0.0),
    dict(wall_ms=1.0, cpu_ms=1.0, energy_j=math.nan),
])
def test_run_sample_rejects_bad_measures(kwargs):
    with pytest.raises(ValueError):
        RunSample(**kwargs)


def test_record_invariants():
    with pytest.raises(ValueError):
        ProblemSpec("p", ())
    with pytest.raises(ValueError):
        ProblemSpec("p", ("a", "a"))
    with pytest.raises(ValueError):
        SolutionSpec("s", "  ")
    with pytest.raises(ValueError):
        MachineDescriptor("")
    assert ProblemSpec("p", ["a", "b"]).input_paths == ("a", "b")
