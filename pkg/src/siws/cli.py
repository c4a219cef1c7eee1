"""Command-line interface: ``siws {analyze,simulate,equilibrium,mitigate,sweep}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .errors import NumericalError, ValidationError
from .mitigation import heal_boost, vaccine_rates
from .plotting import plot_run
from .report import (
    REPORT_SCHEMA_VERSION,
    analysis_report,
    dumps_json,
    equilibria_report,
    plan_report,
    run_summary,
    trajectory_csv,
)
from .runner import override_controls, run_scenario
from .scenario import (
    Event,
    bundled_scenario_path,
    bundled_scenarios,
    dumps_scenario,
    load_scenario,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _load(spec):
    path = Path(spec)
    if not path.exists() and spec in bundled_scenarios():
        return load_scenario(bundled_scenario_path(spec))
    if not path.exists():
        raise ValidationError(f"scenario file not found: {spec} "
                              f"(bundled: {', '.join(bundled_scenarios())})")
    return load_scenario(path)


def _emit(text, out, default_name):
    """Write ``text`` to ``out`` (file, or directory + default name) or stdout."""
    if out is None:
        sys.stdout.write(text)
        return None
    target = Path(out)
    if target.is_dir() or out.endswith(("/", "\\")):
        target.mkdir(parents=True, exist_ok=True)
        target = target / default_name
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8", newline="\n")
    return target


def cmd_analyze(args):
    sc = _load(args.scenario)
    doc = analysis_report(sc, starts=args.starts, seed=args.seed)
    _emit(dumps_json(doc), args.out, f"{sc.name}_analysis.json")


def _simulate(sc, args):
    ctl = override_controls(sc.controls, args.tol)
    return run_scenario(sc, t_end=args.t_end, controls=ctl)


def cmd_simulate(args):
    sc = _load(args.scenario)
    run = _simulate(sc, args)
    formats = args.format or ["csv", "json", "svg"]
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / f"{sc.name}.csv"
        path.write_text(trajectory_csv(run.system, run), encoding="utf-8", newline="\n")
        written.append(path)
    if "json" in formats:
        path = out / f"{sc.name}_summary.json"
        path.write_text(dumps_json(run_summary(sc, run)), encoding="utf-8", newline="\n")
        written.append(path)
    if "svg" in formats:
        written.append(plot_run(run.system, run, out / f"{sc.name}.svg", title=sc.name))
    for path in written:
        print(path)


def cmd_equilibrium(args):
    sc = _load(args.scenario)
    doc = equilibria_report(sc, starts=args.starts, seed=args.seed)
    _emit(dumps_json(doc), args.out, f"{sc.name}_equilibria.json")


def cmd_mitigate(args):
    sc = _load(args.scenario)
    system = sc.system
    if args.strategy == "heal_boost":
        k = args.virus
        if not 1 <= k <= system.m:
            raise ValidationError(f"--virus must be between 1 and {system.m}")
        plan = heal_boost(system.layers[k - 1], args.epsilon, target_virus=k)
    else:
        plan = vaccine_rates(system, margin=args.margin, keep_satisfied=args.keep_satisfied)
    t_event = args.event_time
    if not 0 <= t_event <= sc.t_end:
        raise ValidationError(f"--event-time must lie in [0, {sc.t_end}]")
    kept = [e for e in sc.events if e.t < t_event]
    derived = sc.with_events(kept + [Event(t_event, plan.target_virus, plan.new_delta)])
    derived = replace(derived, name=f"{sc.name}_{plan.strategy}")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    plan_path = out / f"{derived.name}_plan.json"
    plan_path.write_text(dumps_json(plan_report(sc, plan, t_event)), encoding="utf-8",
                         newline="\n")
    scen_path = out / f"{derived.name}.yaml"
    scen_path.write_text(dumps_scenario(derived), encoding="utf-8", newline="\n")
    print(plan_path)
    print(scen_path)


def _sweep_one(spec, args):
    sc = _load(spec)
    report = analysis_report(sc, starts=args.starts, seed=args.seed)
    run = _simulate(sc, args)
    return sc.name, {"analysis": report, "simulation": run_summary(sc, run)}


def cmd_sweep(args):
    specs = args.scenarios or list(bundled_scenarios())
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(lambda s: _sweep_one(s, args), specs))
    merged = {}
    for name, doc in sorted(results, key=lambda r: r[0]):
        if name in merged:
            raise ValidationError(f"duplicate scenario name {name!r} in sweep")
        merged[name] = doc
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "scenarios": merged}
    _emit(dumps_json(doc), args.out, "sweep.json")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="siws",
        description="Analyze and simulate networked multi-virus epidemics "
                    "with a shared resource.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats):
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--t-end", type=float, help="override the scenario horizon")
        p.add_argument("--tol", type=float,
                       help="relative integration tolerance (absolute is never looser)")
        p.add_argument("--seed", type=int, help="seed for multi-start searches")
        p.add_argument("--format", action="append", choices=formats,
                       help="output format; repeat to select several")

    p = sub.add_parser("analyze", help="spectral certificates and equilibria (JSON)")
    p.add_argument("scenario", help="scenario file or bundled name")
    p.add_argument("--starts", type=int, default=0, help="extra random coexistence starts")
    common(p, ["json"])
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="integrate a scenario (CSV, JSON, SVG)")
    p.add_argument("scenario")
    common(p, ["json", "csv", "svg"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibrium", help="list equilibria with stability (JSON)")
    p.add_argument("scenario")
    p.add_argument("--starts", type=int, default=20)
    common(p, ["json"])
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("mitigate", help="design a healing-rate plan and derived scenario")
    p.add_argument("scenario")
    p.add_argument("--strategy", choices=["heal_boost", "virus_as_vaccine"], required=True)
    p.add_argument("--virus", type=int, default=2, help="heal_boost target (1-based)")
    p.add_argument("--epsilon", type=float, default=0.0, help="heal_boost slack per node")
    p.add_argument("--margin", type=float, default=0.05, help="vaccine slack over the bound")
    p.add_argument("--keep-satisfied", action="store_true",
                   help="vaccine: keep rates that already exceed the bound")
    p.add_argument("--event-time", type=float, default=0.5)
    common(p, ["json"])
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("sweep", help="analyze and simulate many scenarios concurrently")
    p.add_argument("scenarios", nargs="*", help="files or bundled names (default: all bundled)")
    p.add_argument("--starts", type=int, default=0)
    p.add_argument("--jobs", type=int, default=4)
    common(p, ["json"])
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
