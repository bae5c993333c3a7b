"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import asdict, replace
from pathlib import Path

from . import io as jio
from .backends import BackendKind, make_backend
from .calibration import fit_idle_slope, measure_idle
from .classifier import nearest_n
from .errors import IoFailure, JoulemarkError
from .model import validate_dataset
from .orchestrator import RunConfig, cpu_wall_discrepancies, preflight_check
from .pipeline import classify_groups, cross_machine_summary, fit_groups, measure_suite
from .profile import spearman_rho

log = logging.getLogger("joulemark")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
LOCK_NAME = ".joulemark.lock"


class UsageError(Exception):
    pass


def _error(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)


@contextmanager
def measurement_lock(out_dir: Path):
    """Refuse to measure into a directory another process is measuring into."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise JoulemarkError(f"another measurement holds {lock}") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _n_range(text):
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return range(lo, hi + 1)


def _config_from(manifest, args) -> RunConfig:
    run = manifest.run
    changes = {}
    if getattr(args, "backend", None):
        changes["backend"] = BackendKind(args.backend)
    if getattr(args, "reps", None) is not None:
        changes["repetitions"] = args.reps
    if getattr(args, "single_core", False):
        changes["single_core"] = True
    try:
        return replace(run, **changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _backend_for(manifest, config, args):
    model = manifest.synthetic
    if model is not None and getattr(args, "seed", None) is not None:
        model = replace(model, seed=args.seed)
    if config.backend is BackendKind.SYNTHETIC and model is None:
        raise JoulemarkError("manifest has no 'synthetic' section for the synthetic backend")
    return make_backend(config.backend, synthetic_model=model, timeout_s=config.timeout_s,
                        cwd=manifest.base_dir)


def _findings_json(findings):
    return [asdict(f) | {"commands": list(f.commands)} for f in findings]


def _gate(findings, force):
    """Findings that stop a measurement unless forced."""
    if force:
        return []
    return [f for f in findings if f.blocking or f.code == "cores-online"]


# -- subcommands -----------------------------------------------------------

def cmd_preflight(args):
    manifest = jio.load_manifest(args.manifest)
    config = _config_from(manifest, args)
    findings = preflight_check(config)
    print(json.dumps({"config_tag": config.config_tag, "findings": _findings_json(findings)},
                     indent=2, sort_keys=True))
    return EXIT_DOMAIN if any(f.blocking for f in findings) else EXIT_OK


def cmd_calibrate(args):
    manifest = jio.load_manifest(args.manifest)
    config = _config_from(manifest, args)
    findings = preflight_check(config)
    stop = [f for f in findings if f.blocking] if not args.force else []
    if stop:
        _error("preflight", "; ".join(f.message for f in stop), findings=_findings_json(stop))
        return EXIT_DOMAIN
    backend = _backend_for(manifest, config, args)
    durations = args.durations or manifest.idle_durations_ms
    out = Path(args.out)
    with measurement_lock(out):
        samples = measure_idle(durations, backend)
    baseline = fit_idle_slope(samples, manifest.machine.id)
    path = jio.write_baseline_json(baseline, out / f"baseline-{manifest.machine.id}.json", samples)
    print(path)
    return EXIT_OK


def cmd_measure(args):
    manifest = jio.load_manifest(args.manifest)
    config = _config_from(manifest, args)
    findings = preflight_check(config)
    stop = _gate(findings, args.force)
    if stop:
        _error("preflight", "; ".join(f.message for f in stop), findings=_findings_json(stop))
        return EXIT_DOMAIN
    backend = _backend_for(manifest, config, args)
    out = Path(args.out)
    with measurement_lock(out):
        sets, rows = measure_suite(manifest, config, backend)
    jio.write_samples_csv(rows, out / "samples.csv")
    jio.write_measurements_json(sets, out / "measurements.json")
    failures = [(s.problem_id, sid, msg) for s in sets for sid, msg in s.failures]
    invalid = [(s.problem_id, v) for s in sets for v in validate_dataset(s)]
    if failures or invalid:
        _error("invalid-samples", f"{len(failures)} failed solution(s), {len(invalid)} violation(s)",
               failures=[list(f) for f in failures], violations=[list(v) for v in invalid])
        return EXIT_DOMAIN
    return EXIT_OK


def _load_sets(paths):
    sets = []
    for p in paths:
        sets.extend(jio.read_measurements_json(p))
    return sets


def _load_baselines(paths):
    baselines = {}
    for p in paths or ():
        b = jio.read_baseline_json(p)
        baselines[b.machine] = b
    return baselines


def _svg_name(g):
    raw = f"{g.problem_id}_{g.machine}_{g.config_tag}"
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in raw) + ".svg"


def cmd_fit(args):
    sets = _load_sets(args.dataset)
    results, degenerate = fit_groups(sets, args.fit_mode, _load_baselines(args.baseline))
    out = Path(args.out)
    jio.write_profile_report([g for g, _ in results], out / "profiles", args.spearman_threshold)
    for g, points in results:
        jio.emit_scatter_svg(g, points, out / "plots" / _svg_name(g))
    if degenerate:
        _error("degenerate-groups", f"{len(degenerate)} group(s) could not be fitted",
               groups=[{"group": list(k), "reason": r} for k, r in degenerate])
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_outliers(args):
    sets = _load_sets(args.dataset)
    results, degenerate = fit_groups(sets, "ols", _load_baselines(args.baseline))
    groups = [g for g, _ in results]
    doc = {
        "groups": [
            {"problem_id": g.problem_id, "machine": g.machine, "config_tag": g.config_tag,
             "sigma_e": g.profile.sigma_e, "slope_a": g.profile.slope_a,
             "outliers": [{"solution_id": e.solution_id, "residual": e.residual,
                           "tier": e.tier.label, "direction": e.direction}
                          for e in g.outliers.entries if e.tier]}
            for g in sorted(groups, key=lambda g: g.key)
        ],
        "cross_machine": cross_machine_summary(groups),
    }
    jio.write_json(doc, Path(args.out) / "outliers.json")
    if degenerate:
        _error("degenerate-groups", f"{len(degenerate)} group(s) could not be fitted",
               groups=[{"group": list(k), "reason": r} for k, r in degenerate])
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_classify(args):
    train = [g for g in jio.read_profile_report(args.train) if g.profile.fit_mode == "ols"]
    test_results, degenerate = fit_groups(_load_sets(args.test), "ols", _load_baselines(args.baseline))
    if degenerate:
        _error("slope-fit", "test set slope fit failed",
               groups=[{"group": list(k), "reason": r} for k, r in degenerate])
        return EXIT_DOMAIN
    test = [g for g, _ in test_results]
    if args.config_tag:
        train = [g for g in train if g.config_tag == args.config_tag]
        test = [g for g in test if g.config_tag == args.config_tag]
    machines = sorted({g.machine for g in train})
    out = Path(args.out)
    summary = {"normalization": args.normalization, "machines": {}}
    for machine in machines:
        tr = [g for g in train if g.machine == machine]
        te = [g for g in test if g.machine == machine]
        if len({g.problem_id for g in tr}) < 2:
            _error("classify", f"machine {machine}: need at least 2 training problems")
            return EXIT_DOMAIN
        if not te:
            continue
        n_values = None
        if args.n_range is not None:
            n_values = [n for n in args.n_range if n <= len(tr)]
        table, counts = classify_groups(tr, te, n_values=n_values, blind=args.blind,
                                        normalization=args.normalization)
        jio.write_classification_csv(table, out / f"classification-{machine}.csv")
        entry = {
            "train_problems": list(table.train_ids),
            "test_sets": list(table.test_ids),
            "candidates": {t: nearest_n(table, t, len(table.train_ids)) for t in table.test_ids},
        }
        if counts is not None:
            entry["success_counts"] = {str(n): c for n, c in counts.items()}
            entry["test_count"] = len(table.test_ids)
        summary["machines"][machine] = entry
    jio.write_json(summary, out / "classification.json")
    return EXIT_OK


def cmd_report(args):
    rows = jio.read_samples_csv(args.samples)
    groups = {}
    for r in rows:
        groups.setdefault((r.problem_id, r.machine, r.config_tag), []).append(r)
    doc = {"threshold_ms": args.gap_ms, "groups": []}
    for key in sorted(groups):
        members = groups[key]
        samples = [r.sample for r in members]
        flagged = {}
        for r in members:
            if cpu_wall_discrepancies([r.sample], args.gap_ms):
                flagged[r.solution_id] = flagged.get(r.solution_id, 0) + 1
        try:
            rho = spearman_rho([s.wall_ms for s in samples], [s.cpu_ms for s in samples])
        except (JoulemarkError, ValueError):
            rho = None
        doc["groups"].append({
            "problem_id": key[0], "machine": key[1], "config_tag": key[2],
            "samples": len(samples), "wall_cpu_spearman": rho,
            "gap_exceeded": dict(sorted(flagged.items())),
        })
    jio.write_json(doc, Path(args.out) / "time-report.json")
    if args.dataset:
        results, _ = fit_groups(_load_sets(args.dataset), "ols", _load_baselines(args.baseline))
        jio.write_profile_report([g for g, _ in results], Path(args.out) / "profiles",
                                 args.spearman_threshold)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="joulemark", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def measuring(p):
        p.add_argument("manifest")
        p.add_argument("--backend", choices=[k.value for k in BackendKind])
        p.add_argument("--reps", type=int)
        p.add_argument("--single-core", action="store_true")
        p.add_argument("--seed", type=int)
        p.add_argument("--force", action="store_true")

    p = sub.add_parser("preflight", help="check the machine before measuring")
    measuring(p)
    p.set_defaults(func=cmd_preflight)

    p = sub.add_parser("calibrate", help="estimate the idle energy slope")
    measuring(p)
    p.add_argument("--durations", type=float, nargs="+", metavar="MS")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("measure", help="run a suite and write samples and measurements")
    measuring(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("fit", help="fit energy profiles per group")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--baseline", action="append", metavar="FILE")
    p.add_argument("--fit-mode", choices=["ols", "wls-c", "wls-tc"], default="ols")
    p.add_argument("--spearman-threshold", type=float, default=jio.SPEARMAN_HIGHLIGHT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("outliers", help="outlier tiers and cross-machine outliers")
    p.add_argument("dataset", nargs="+")
    p.add_argument("--baseline", action="append", metavar="FILE")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("classify", help="nearest-slope problem classification")
    p.add_argument("--train", required=True, help="profiles.json from 'fit'")
    p.add_argument("--test", required=True, nargs="+", help="measurements.json of test sets")
    p.add_argument("--baseline", action="append", metavar="FILE")
    p.add_argument("--n-range", type=_n_range)
    p.add_argument("--config-tag")
    p.add_argument("--normalization", choices=["independent", "train-min"], default="independent")
    p.add_argument("--blind", action="store_true", help="no ground truth; emit candidates only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="CPU-vs-wall time report and profile tables")
    p.add_argument("--samples", required=True)
    p.add_argument("--dataset", nargs="*")
    p.add_argument("--baseline", action="append", metavar="FILE")
    p.add_argument("--gap-ms", type=float, default=10.0)
    p.add_argument("--spearman-threshold", type=float, default=jio.SPEARMAN_HIGHLIGHT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _error("usage", str(exc))
        return EXIT_USAGE
    except IoFailure as exc:
        _error("io", str(exc))
        return EXIT_DOMAIN
    except JoulemarkError as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
