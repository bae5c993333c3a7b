"""File formats: suite manifests, sample CSVs, measurement/baseline/profile
JSON, classification tables and SVG scatter plots.

Floats are written with ``repr``, the shortest string that round-trips, so
files are stable under diff and reload bit-identically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backends.synthetic import SyntheticModel
from .calibration import IdleBaseline
from .errors import IoFailure, SchemaMismatch
from .model import MachineDescriptor, MeasurementSet, ProblemSpec, RunSample, SolutionMeasurement, SolutionSpec
from .orchestrator import RunConfig
from .profile import OutlierEntry, OutlierReport, OutlierTier, ProblemProfile

SAMPLE_COLUMNS = (
    "problem_id", "solution_id", "machine", "config_tag",
    "run_index", "wall_ms", "cpu_ms", "energy_j",
)
PROFILE_COLUMNS = (
    "problem_id", "machine", "config_tag", "fit_mode", "n", "slope_a", "sse", "sigma_e",
    "spearman", "spearman_flagged", "outliers_low", "outliers_medium", "outliers_high",
    "free_intercept_b",
)
SPEARMAN_HIGHLIGHT = 0.95


def fmt(x) -> str:
    return repr(float(x))


def _write_text(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- samples ---------------------------------------------------------------

@dataclass(frozen=True)
class SampleRow:
    problem_id: str
    solution_id: str
    machine: str
    config_tag: str
    sample: RunSample


def write_samples_csv(rows, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for r in rows:
        s = r.sample
        writer.writerow([r.problem_id, r.solution_id, r.machine, r.config_tag,
                         s.run_index, fmt(s.wall_ms), fmt(s.cpu_ms), fmt(s.energy_j)])
    return _write_text(path, buf.getvalue())


def read_samples_csv(path) -> list:
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    header = tuple(reader.fieldnames or ())
    if not header:
        raise SchemaMismatch(f"{path}: missing header")
    extra = [c for c in header if c not in SAMPLE_COLUMNS]
    missing = [c for c in SAMPLE_COLUMNS if c not in header]
    if extra:
        raise SchemaMismatch(f"{path}: unknown column(s) {', '.join(extra)}")
    if missing:
        raise SchemaMismatch(f"{path}: missing column(s) {', '.join(missing)}")
    rows = []
    for lineno, rec in enumerate(reader, 2):
        try:
            sample = RunSample(float(rec["wall_ms"]), float(rec["cpu_ms"]),
                               float(rec["energy_j"]), int(rec["run_index"]))
        except (TypeError, ValueError) as exc:
            raise SchemaMismatch(f"{path}:{lineno}: {exc}") from None
        rows.append(SampleRow(rec["problem_id"], rec["solution_id"], rec["machine"],
                              rec["config_tag"], sample))
    return rows


# -- measurement sets ------------------------------------------------------

def measurement_set_to_dict(ms: MeasurementSet) -> dict:
    return {
        "machine": ms.machine,
        "problem_id": ms.problem_id,
        "config_tag": ms.config_tag,
        "partial": ms.partial,
        "failures": [{"solution_id": s, "error": e} for s, e in ms.failures],
        "measurements": [asdict(m) for m in ms.measurements],
    }


def measurement_set_from_dict(d: dict) -> MeasurementSet:
    try:
        return MeasurementSet(
            machine=d["machine"],
            problem_id=d["problem_id"],
            config_tag=d["config_tag"],
            measurements=[SolutionMeasurement(**m) for m in d["measurements"]],
            failures=[(f["solution_id"], f["error"]) for f in d.get("failures", [])],
        )
    except (KeyError, TypeError) as exc:
        raise SchemaMismatch(f"bad measurement set record: {exc}") from None


def write_measurements_json(sets, path):
    return _write_text(path, _dump_json({"measurement_sets": [measurement_set_to_dict(s) for s in sets]}))


def read_measurements_json(path) -> list:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None
    if isinstance(doc, dict) and "measurement_sets" in doc:
        return [measurement_set_from_dict(d) for d in doc["measurement_sets"]]
    raise SchemaMismatch(f"{path}: expected an object with 'measurement_sets'")


# -- baselines -------------------------------------------------------------

def write_baseline_json(baseline: IdleBaseline, path, samples=()):
    doc = asdict(baseline)
    doc["samples"] = [{"duration_ms": d, "energy_j": e} for d, e in samples]
    return _write_text(path, _dump_json(doc))


def read_baseline_json(path) -> IdleBaseline:
    try:
        doc = json.loads(_read_text(path))
        return IdleBaseline(doc["machine"], float(doc["idle_slope_j_per_ms"]),
                            int(doc["sample_count"]), float(doc.get("fit_residual_sd", 0.0)))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: bad baseline record: {exc}") from None


# -- manifests -------------------------------------------------------------

@dataclass(frozen=True)
class SuiteManifest:
    machine: MachineDescriptor
    problems: tuple
    run: RunConfig
    base_dir: Path
    synthetic: SyntheticModel = None
    idle_durations_ms: tuple = (250.0, 500.0, 1000.0, 2000.0)


def _synthetic_from_dict(d) -> SyntheticModel:
    cpu = {}
    for key, value in d.get("cpu_ms", {}).items():
        if isinstance(value, dict):
            # nested per-solution tables flatten to scoped keys
            for input_name, ms in value.items():
                cpu[f"{key}::{input_name}"] = float(ms)
        else:
            cpu[key] = float(value)
    return SyntheticModel(
        active_power_w=float(d["active_power_w"]),
        idle_power_w=float(d.get("idle_power_w", 0.0)),
        cpu_ms_per_input=cpu,
        noise_rel=float(d.get("noise_rel", 0.0)),
        seed=int(d.get("seed", 0)),
    )


def load_manifest(path, check_files=True) -> SuiteManifest:
    """Load a suite manifest; input paths are relative to the manifest's folder."""
    path = Path(path)
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: {exc}") from None
    base = path.parent.resolve()
    try:
        machine = MachineDescriptor(**doc["machine"])
        run = RunConfig(**doc.get("run", {}))
        problems = []
        for p in doc["problems"]:
            solutions = [SolutionSpec(**{**s, "tags": tuple(s.get("tags", ()))})
                         for s in p.get("solutions", [])]
            ids = [s.solution_id for s in solutions]
            if len(set(ids)) != len(ids):
                raise SchemaMismatch(f"{path}: duplicate solution_id in problem {p['problem_id']}")
            problems.append(ProblemSpec(p["problem_id"], tuple(p["input_paths"]),
                                        p.get("category", ""), tuple(solutions)))
        synthetic = _synthetic_from_dict(doc["synthetic"]) if "synthetic" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaMismatch):
            raise
        raise SchemaMismatch(f"{path}: {exc}") from None
    if check_files:
        for p in problems:
            for ip in p.input_paths:
                if not (base / ip).is_file():
                    raise IoFailure(f"input file not found: {base / ip}")
    kwargs = {}
    if "idle_durations_ms" in doc:
        kwargs["idle_durations_ms"] = tuple(float(d) for d in doc["idle_durations_ms"])
    return SuiteManifest(machine, tuple(problems), run, base, synthetic, **kwargs)


# -- profiles & reports ----------------------------------------------------

@dataclass(frozen=True)
class GroupResult:
    problem_id: str
    machine: str
    config_tag: str
    profile: ProblemProfile
    outliers: OutlierReport = None
    free_intercept_b: float = None

    @property
    def key(self):
        return (self.problem_id, self.machine, self.config_tag)


def _group_to_dict(g: GroupResult, threshold) -> dict:
    d = {
        "problem_id": g.problem_id,
        "machine": g.machine,
        "config_tag": g.config_tag,
        "profile": asdict(g.profile),
        "diagnostic_only": g.profile.diagnostic_only,
        "spearman_flagged": g.profile.spearman < threshold,
        "free_intercept_b": g.free_intercept_b,
    }
    if g.outliers is not None:
        d["outlier_counts"] = g.outliers.counts()
        d["outliers"] = [
            {**asdict(e), "tier": e.tier.label} for e in g.outliers.entries
        ]
    return d


def _group_from_dict(d) -> GroupResult:
    outliers = None
    if "outliers" in d:
        p = d["profile"]
        entries = tuple(OutlierEntry(**{**e, "tier": OutlierTier.from_label(e["tier"])})
                        for e in d["outliers"])
        outliers = OutlierReport(p["slope_a"], p["sigma_e"], entries)
    return GroupResult(d["problem_id"], d["machine"], d["config_tag"],
                       ProblemProfile(**d["profile"]), outliers, d.get("free_intercept_b"))


def write_profile_report(groups, path_prefix, spearman_threshold=SPEARMAN_HIGHLIGHT):
    """Write ``<prefix>.csv`` and ``<prefix>.json``; return both paths.

    Groups whose Spearman coefficient is below ``spearman_threshold`` are
    flagged.
    """
    groups = sorted(groups, key=lambda g: g.key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_COLUMNS)
    for g in groups:
        p = g.profile
        counts = g.outliers.counts() if g.outliers is not None else {"low": "", "medium": "", "high": ""}
        w.writerow([g.problem_id, g.machine, g.config_tag, p.fit_mode, p.n, fmt(p.slope_a),
                    fmt(p.sse), fmt(p.sigma_e), fmt(p.spearman),
                    int(p.spearman < spearman_threshold),
                    counts["low"], counts["medium"], counts["high"],
                    "" if g.free_intercept_b is None else fmt(g.free_intercept_b)])
    prefix = Path(path_prefix)
    csv_path = _write_text(prefix.with_suffix(".csv"), buf.getvalue())
    doc = {"spearman_threshold": spearman_threshold,
           "groups": [_group_to_dict(g, spearman_threshold) for g in groups]}
    json_path = _write_text(prefix.with_suffix(".json"), _dump_json(doc))
    return csv_path, json_path


def read_profile_report(path) -> list:
    try:
        doc = json.loads(_read_text(path))
        return [_group_from_dict(d) for d in doc["groups"]]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SchemaMismatch(f"{path}: bad profile report: {exc}") from None


# -- classification --------------------------------------------------------

def write_classification_csv(table, path):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["train_problem", *table.test_ids])
    for i, r in enumerate(table.train_ids):
        w.writerow([r, *(fmt(v) for v in table.cells[i])])
    return _write_text(path, buf.getvalue())


def write_json(obj, path):
    return _write_text(path, _dump_json(obj))


# -- plots -----------------------------------------------------------------

@dataclass
class ScatterPlot:
    """Points, origin line and the +-2 sigma_e band for one group (ms vs J)."""

    title: str
    t: list
    c: list
    slope: float
    sigma_e: float
    outliers: list = field(default_factory=list)  # (t, c, c_sd, tier label)
    width: int = 640
    height: int = 480
    margin: int = 60

    def render(self) -> str:
        W, H, M = self.width, self.height, self.margin
        t_max = max(self.t) * 1.05 if self.t else 1.0
        top = max([*self.c, self.slope * t_max + 2 * self.sigma_e] or [1.0])
        c_max = top * 1.05 if top > 0 else 1.0

        def px(t):
            return M + (W - 2 * M) * t / t_max

        def py(c):
            return H - M - (H - 2 * M) * c / c_max

        def line(x1, y1, x2, y2, style):
            return (f'<line x1="{px(x1):.2f}" y1="{py(y1):.2f}" x2="{px(x2):.2f}" '
                    f'y2="{py(y2):.2f}" {style}/>')

        parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2:.0f}" y="24" text-anchor="middle" font-size="14">{_esc(self.title)}</text>',
            line(0, 0, t_max, 0, 'stroke="black"'),
            line(0, 0, 0, c_max, 'stroke="black"'),
            f'<text x="{W / 2:.0f}" y="{H - 15}" text-anchor="middle" font-size="12">time (ms)</text>',
            f'<text x="15" y="{H / 2:.0f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 15 {H / 2:.0f})">energy (J)</text>',
            line(0, 0, t_max, self.slope * t_max, 'stroke="blue" stroke-width="1.5"'),
        ]
        for sign in (1, -1):
            off = sign * 2 * self.sigma_e
            parts.append(line(0, off, t_max, self.slope * t_max + off,
                              'stroke="blue" stroke-dasharray="6,4"'))
        for t, c in zip(self.t, self.c):
            parts.append(f'<circle cx="{px(t):.2f}" cy="{py(c):.2f}" r="3" fill="black"/>')
        colors = {"low": "orange", "medium": "darkorange", "high": "red"}
        for t, c, sd, tier in self.outliers:
            color = colors.get(tier, "gray")
            parts.append(line(t, c - sd, t, c + sd, f'stroke="{color}"'))
            parts.append(f'<circle cx="{px(t):.2f}" cy="{py(c):.2f}" r="4" fill="{color}"/>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def _esc(text) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_scatter_svg(group: GroupResult, points, path):
    """Scatter of one group's points with the fitted line and outlier error bars."""
    points = list(points)
    tiers = group.outliers.by_solution() if group.outliers is not None else {}
    outliers = [(p.t, p.c, p.c_sd, tiers[p.solution_id].tier.label)
                for p in points if p.solution_id in tiers and tiers[p.solution_id].tier]
    plot = ScatterPlot(
        title=f"{group.problem_id} | {group.machine} | {group.config_tag}",
        t=[p.t for p in points],
        c=[p.c for p in points],
        slope=group.profile.slope_a,
        sigma_e=group.profile.sigma_e if math.isfinite(group.profile.sigma_e) else 0.0,
        outliers=outliers,
    )
    return _write_text(path, plot.render())
