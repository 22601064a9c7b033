"""Command-line entry point.

Exit codes: 0 success, 2 schema/scenario error, 3 hypothesis violation,
4 solver failure, 5 bound-check failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import builtin
from .errors import (
    DegenerateAverage, ExpressionError, HypothesisViolation, InconsistentTrajectory,
    JumpWindowsDisagree, SchemaError, ShockfrontError, SolverError,
)
from .fields import validate_hypotheses
from .io import default_out_dir, dump_json, read_scenario, recheck_run_report, write_run
from .penalty import PenaltyOptions, solve_penalized
from .projection import ProjectionOptions, solve_projected
from .sweep import compare_solvers, epsilon_sweep

EXIT_OK, EXIT_SCHEMA, EXIT_HYPOTHESIS, EXIT_SOLVER, EXIT_BOUNDS = 0, 2, 3, 4, 5


def _load(arg: str):
    if arg.startswith("builtin:"):
        name = arg.split(":", 1)[1]
        if name not in builtin.BUILTINS:
            raise SchemaError("", f"unknown builtin scenario {name!r}; "
                                  f"choose from {', '.join(sorted(builtin.BUILTINS))}")
        return builtin.BUILTINS[name]()
    return read_scenario(arg)


def _certificate(scenario, variant):
    cert = validate_hypotheses(scenario, eta_variant=variant)
    for note in cert.notes:
        print(f"note: {note}", file=sys.stderr)
    return cert


def _cmd_validate(args) -> int:
    cert = _certificate(_load(args.scenario), args.eta_variant)
    print(dump_json(cert.to_dict()), end="")
    return EXIT_OK if cert.valid else EXIT_HYPOTHESIS


def _run_solver(scenario, args):
    if args.method == "penalty":
        return solve_penalized(scenario, PenaltyOptions(epsilon=args.epsilon))
    return solve_projected(scenario, ProjectionOptions(h=args.step))


def _cmd_solve(args) -> int:
    scenario = _load(args.scenario)
    cert = _certificate(scenario, args.eta_variant)
    t0 = time.perf_counter()
    traj = _run_solver(scenario, args)
    elapsed = time.perf_counter() - t0
    path = write_run(traj, scenario, cert, args.out, timing={"solve_seconds": elapsed})
    print(path)
    return _verdict(cert, path)


def _verdict(cert, report_path) -> int:
    report = json.loads(Path(report_path).read_text(encoding="utf-8"))
    if not cert.valid:
        print(f"certificate invalid: {report['bounds_note']}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    failed = [e for e in report["bounds"]["entries"] if not e["satisfied"]]
    for e in failed:
        print(f"bound {e['name']} violated: observed {e['observed']} vs {e['bound']}",
              file=sys.stderr)
    return EXIT_BOUNDS if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    scenario = _load(args.scenario)
    cert = _certificate(scenario, args.eta_variant)
    eps = [float(e) for e in args.epsilons.split(",") if e.strip()]
    t0 = time.perf_counter()
    result = epsilon_sweep(scenario, eps, certificate=cert)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    for tr in result.trajectories:
        write_run(tr, scenario, cert, out)
    if result.projection is not None:
        write_run(result.projection, scenario, cert, out)
    (out / "sweep.json").write_text(dump_json(result.to_dict()), encoding="utf-8")
    (out / "sweep.timing.json").write_text(dump_json({"sweep_seconds": elapsed}),
                                           encoding="utf-8")
    print(out / "sweep.json")
    if not cert.valid:
        return EXIT_HYPOTHESIS
    return EXIT_OK if result.bounds_satisfied else EXIT_BOUNDS


def _cmd_compare(args) -> int:
    scenario = _load(args.scenario)
    gap = compare_solvers(scenario, args.epsilon, args.step)
    print(dump_json({"epsilon": args.epsilon, "step": args.step, "sup_gap": gap}), end="")
    return EXIT_OK


def _cmd_check(args) -> int:
    result = recheck_run_report(args.report)
    fresh = result["report"]
    if fresh is None:
        print(f"bounds not checkable: {result['note']}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    for e in fresh.entries:
        mark = "ok  " if e.satisfied else "FAIL"
        print(f"{mark} {e.name:18s} observed={e.observed:.6g} bound={e.bound:.6g} "
              f"margin={e.margin:.3g}")
    if not result["reproduced"]:
        print("stored verdicts differ from the re-run", file=sys.stderr)
        return EXIT_BOUNDS
    return EXIT_OK if fresh.satisfied else EXIT_BOUNDS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shockfront", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_arg(sp):
        sp.add_argument("scenario", help="scenario JSON file or builtin:<name>")
        sp.add_argument("--eta-variant", choices=("literal", "shifted"), default="literal")

    sp = sub.add_parser("validate", help="check field hypotheses, print the certificate")
    scenario_arg(sp)
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("solve", help="run one solver, write CSV and report")
    scenario_arg(sp)
    sp.add_argument("--method", choices=("penalty", "projection"), required=True)
    sp.add_argument("--epsilon", type=float, default=1e-3)
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--out", default=default_out_dir())
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("sweep", help="epsilon sweep with bound reports and rate fit")
    scenario_arg(sp)
    sp.add_argument("--epsilons", required=True, help="comma-separated, decreasing")
    sp.add_argument("--out", default=default_out_dir())
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("compare", help="off-window sup distance penalty vs projection")
    sp.add_argument("scenario")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--step", type=float, required=True)
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("check", help="re-run the bound checks of a stored run report")
    sp.add_argument("report")
    sp.set_defaults(func=_cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SchemaError, ExpressionError, InconsistentTrajectory) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (HypothesisViolation, DegenerateAverage) as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        if isinstance(exc, HypothesisViolation):
            for v in exc.violations:
                print(f"  {v.hypothesis}: t={v.t:.6g} x={v.x:.6g} value={v.value:.6g}",
                      file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (SolverError, JumpWindowsDisagree) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ShockfrontError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
