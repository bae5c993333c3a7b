import os
import stat
import textwrap

import pytest

from joulemark.backends.synthetic import SyntheticModel
from joulemark.model import ProblemSpec, SolutionSpec


@pytest.fixture
def powercap_root(tmp_path):
    """A fake powercap tree with a frozen package counter."""
    domain = tmp_path / "powercap" / "intel-rapl:0"
    domain.mkdir(parents=True)
    (domain / "energy_uj").write_text("123456\n")
    (domain / "max_energy_range_uj").write_text("262143328850\n")
    return tmp_path / "powercap"


@pytest.fixture
def fake_perf(tmp_path, monkeypatch):
    """A ``perf`` stand-in on PATH.

    It runs the measured command, and reports the command's stdout as the
    package energy in joules, so an input file holding ``2.5`` costs 2.5 J.
    """
    bindir = tmp_path / "bin"
    bindir.mkdir()
    script = bindir / "perf"
    script.write_text(textwrap.dedent("""\
        #!/usr/bin/env bash
        while [ "$1" != "--all-cpus" ]; do shift; done
        shift
        out=$("$@")
        status=$?
        echo "# started on Mon Jan  1 00:00:00 2024" >&2
        echo "${out:-0};Joules;power/energy-pkg/;1000000;100.00;;" >&2
        echo "0.25;;user_time;1000000;100.00;;" >&2
        echo "0.05;;system_time;1000000;100.00;;" >&2
        exit $status
        """))
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    monkeypatch.setenv("PATH", f"{bindir}{os.pathsep}{os.environ['PATH']}")
    return script


def make_suite(n_solutions, *, base_ms=100.0, step_ms=37.0, inputs=("in1", "in2"), prefix="s"):
    """Problem + solutions + per-solution CPU table spread over a range of times."""
    solutions = [SolutionSpec(f"{prefix}{i:02d}", f"./{prefix}{i:02d}") for i in range(n_solutions)]
    cpu = {}
    for i, s in enumerate(solutions):
        for k, name in enumerate(inputs):
            cpu[f"{s.solution_id}::{name}"] = base_ms + step_ms * i + 11.0 * k
    problem = ProblemSpec("p1", tuple(inputs), "test", tuple(solutions))
    return problem, solutions, cpu


@pytest.fixture
def synthetic_suite():
    problem, solutions, cpu = make_suite(30)
    model = SyntheticModel(active_power_w=10.0, idle_power_w=0.0, cpu_ms_per_input=cpu,
                           noise_rel=0.02, seed=7)
    return problem, solutions, model


def write_synthetic_manifest(root, *, machine="HPELITE", problems=None, seed=7, noise=0.02,
                             active=10.0, idle=0.0, reps=10, backend="synthetic"):
    """Lay out input files plus a manifest.json for a synthetic suite; return its path."""
    import json

    root.mkdir(parents=True, exist_ok=True)
    problems = problems or {"1068": 12, "1083": 12}
    doc_problems, cpu = [], {}
    for p_index, (pid, n_sol) in enumerate(sorted(problems.items())):
        inputs = [f"inputs/{pid}/in{k}" for k in (1, 2)]
        for ip in inputs:
            (root / ip).parent.mkdir(parents=True, exist_ok=True)
            (root / ip).write_text("42\n")
        sols = []
        for i in range(n_sol):
            sid = f"{pid}-s{i:02d}"
            sols.append({"solution_id": sid, "command_template": f"./bin/{sid}",
                         "language_tag": "C++", "flag_tag": "-O2", "tags": ["Rand30"]})
            cpu[sid] = {ip: 50.0 + 23.0 * i + 7.0 * k + 5.0 * p_index for k, ip in enumerate(inputs)}
        doc_problems.append({"problem_id": pid, "input_paths": inputs, "category": "",
                             "solutions": sols})
    doc = {
        "machine": {"id": machine, "cpu_label": "synthetic", "core_count": 4, "notes": ""},
        "run": {"repetitions": reps, "backend": backend, "flag_tag": "-O2"},
        "problems": doc_problems,
        "synthetic": {"active_power_w": active, "idle_power_w": idle, "noise_rel": noise,
                      "seed": seed, "cpu_ms": cpu},
        "idle_durations_ms": [250, 500, 1000, 2000],
    }
    path = root / "manifest.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


ACCEPTANCE_RESULTS = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one exit criterion for the terminal summary."""
    marker = request.node.get_closest_marker("acceptance")
    label = marker.args[0] if marker else request.node.name
    ACCEPTANCE_RESULTS[label] = ("FAIL", "")

    def note(detail):
        ACCEPTANCE_RESULTS[label] = ("FAIL", detail)

    yield note
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    ACCEPTANCE_RESULTS[label] = (status, ACCEPTANCE_RESULTS[label][1])


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0][2:])):
        status, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"{status}  {label}" + (f"  [{detail}]" if detail else ""))
