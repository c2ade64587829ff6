"""Command-line entry point.

Exit status: 0 when every non-vacuous check passes, 1 when a check fails,
2 for usage, parse and engine errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace

from .checks import list_checks
from .fuzz import FuzzBounds, cox_fuzz, density_fuzz, random_model_fuzz
from .montecarlo.natural import NaturalModelSpec, natural_sde_solve
from .montecarlo.paths import EnsembleConfig, simulate_paths
from .reports import FAIL, to_jsonable
from .scenario import (
    _BARLOW_FIELDS,
    _NATURAL_FIELDS,
    EngineError,
    ScenarioError,
    build_report,
    execute,
    load_scenario,
    run_barlow_demo,
    run_natural_demo,
    to_canonical,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list) and obj and all(not isinstance(v, (dict, list)) for v in obj):
        rows.append((prefix, " ".join(str(v) for v in obj)))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, rows)
    else:
        rows.append((prefix, obj))


def report_csv(report: dict) -> str:
    """One row per check verdict and per numeric estimate: ``check,field,value``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "field", "value"])
    w.writerow(["", "verdict", report.get("verdict")])
    for c in report.get("checks", []):
        w.writerow([c["name"], "verdict", c["verdict"]])
        rows: list = []
        _flatten("", c.get("estimates", {}), rows)
        for k, v in rows:
            w.writerow([c["name"], k, v])
        if c.get("witness") is not None:
            w.writerow([c["name"], "witness", json.dumps(c["witness"], sort_keys=True)])
    return buf.getvalue()


def _emit(report: dict, fmt: str, out: str | None):
    text = report_csv(report) if fmt == "csv" else json.dumps(to_jsonable(report), indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _status(report: dict) -> int:
    return EXIT_FAIL if report["verdict"] == FAIL else EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if cfg.kind.endswith("-demo") and (args.paths is not None or args.dt is not None):
        model = dict(cfg.model)
        if args.paths is not None:
            model["paths"] = args.paths
        if args.dt is not None:
            model["dt"] = args.dt
        cfg = replace(cfg, model=model)
    try:
        reports = execute(cfg)
    except EngineError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = build_report(reports, to_canonical(cfg), cfg.seed)
    _emit(report, args.format or cfg.output.get("format", "json"), args.out or cfg.output.get("path"))
    return _status(report)


def _cmd_list(args) -> int:
    catalog = list_checks()
    if (args.format or "json") == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "anchor", "description"])
        for c in catalog:
            w.writerow([c["name"], c["anchor"], c["description"]])
        text = buf.getvalue()
    else:
        text = json.dumps(catalog, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_fuzz(args) -> int:
    try:
        bounds = FuzzBounds(args.max_outcomes, args.max_T, args.max_times, args.max_alphabet)
    except ValueError as exc:
        print(f"fuzz: {exc}", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed or 0
    reps = []
    if args.family in ("finite", "all"):
        reps.append(random_model_fuzz(args.models, seed, bounds))
    if args.family in ("density", "all"):
        reps.append(density_fuzz(args.models, seed, min(bounds.max_outcomes, 8), min(bounds.max_T, 4)))
    if args.family in ("cox", "all"):
        reps.append(cox_fuzz(args.models, seed, min(bounds.max_outcomes, 8), min(bounds.max_T, 4)))
    report = build_report(reps, {"fuzz": {"models": args.models, "family": args.family, **vars(bounds)}}, seed)
    _emit(report, args.format or "json", args.out)
    return _status(report)


def _cmd_demo(args) -> int:
    seed = args.seed or 0
    try:
        if args.which == "barlow":
            params = dict(_BARLOW_FIELDS, increments=args.increments)
            if args.paths is not None:
                params["paths"] = args.paths
            if args.dt is not None:
                params["dt"] = args.dt
            reps = run_barlow_demo(params, seed)
        else:
            params = dict(_NATURAL_FIELDS)
            if args.paths is not None:
                params["paths"] = args.paths
            if args.dt is not None:
                params["dt"] = args.dt
            if args.euler_paths is not None:
                params["euler_paths"] = args.euler_paths
            reps = run_natural_demo(params, seed)
            if args.trajectories:
                _dump_trajectories(params, seed, args.trajectories)
    except ValueError as exc:
        print(f"demo {args.which}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = build_report(reps, {"demo": args.which, **{k: v for k, v in params.items() if k != "spec"}}, seed)
    _emit(report, args.format or "json", args.out)
    return _status(report)


def _dump_trajectories(params, seed, path, n_paths: int = 20):
    spec = NaturalModelSpec(**params.get("spec", {}))
    e = simulate_paths(EnsembleConfig(min(n_paths, params["paths"]), params["dt"], params["horizon"], seed))
    sol = natural_sde_solve(spec, e)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t", "M_u", "rejected"])
        for i in range(sol.trajectories.shape[0]):
            for t, x in zip(sol.times, sol.trajectories[i]):
                w.writerow([i, f"{t:.6g}", f"{x:.10g}", bool(sol.rejected[i])])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--out", default=None, help="write the report to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None, help="report format (default json)")
    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--paths", type=int, default=None, help="number of Monte Carlo paths")
    mc.add_argument("--dt", type=float, default=None, help="simulation step size")

    p = _Parser(prog="osfkit", description="Optional splitting checks on finite models and Monte Carlo demos.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", parents=[common, mc], help="run a scenario file")
    r.add_argument("scenario")
    r.set_defaults(fn=_cmd_run)

    ls = sub.add_parser("list-checks", parents=[common], help="print the check catalog")
    ls.set_defaults(fn=_cmd_list)

    fz = sub.add_parser("fuzz", parents=[common], help="run the identity suite on random finite models")
    fz.add_argument("--models", type=int, default=1000)
    fz.add_argument("--max-outcomes", type=int, default=32)
    fz.add_argument("--max-T", type=int, default=8)
    fz.add_argument("--max-times", type=int, default=3)
    fz.add_argument("--max-alphabet", type=int, default=3)
    fz.add_argument("--family", choices=("finite", "density", "cox", "all"), default="all")
    fz.set_defaults(fn=_cmd_fuzz)

    demo = sub.add_parser("demo", help="Monte Carlo demonstrations")
    dsub = demo.add_subparsers(dest="which", required=True, parser_class=_Parser)
    b = dsub.add_parser("barlow", parents=[common, mc], help="last zero before exit from (-1, 1)")
    b.add_argument("--increments", choices=("rademacher", "gaussian"), default="rademacher")
    b.set_defaults(fn=_cmd_demo)
    nat = dsub.add_parser("natural", parents=[common, mc], help="default time with prescribed survival")
    nat.add_argument("--euler-paths", type=int, default=None)
    nat.add_argument("--trajectories", default=None, help="CSV file for a few M^u trajectories")
    nat.set_defaults(fn=_cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    for name in ("paths", "models"):
        v = getattr(args, name, None)
        if v is not None and v <= 0:
            print(f"osfkit: --{name} must be positive", file=sys.stderr)
            return EXIT_USAGE
    if getattr(args, "dt", None) is not None and not args.dt > 0:
        print("osfkit: --dt must be positive", file=sys.stderr)
        return EXIT_USAGE
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
