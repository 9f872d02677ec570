"""Command line entry point ``minimax-solve``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigurationError, InvalidInputError
from ..problems import BUILTIN_PROBLEMS, make_problem
from .diagnostics import check_gradients, estimate_lipschitz
from .runner import RunConfig, run, run_suite

GRAD_TOL = 1e-5


def _load_config(args) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.problem:
        data["problem"] = {"name": args.problem}
    if "problem" not in data:
        raise SystemExit("error: give --config with a 'problem' entry or --problem")
    # Flags win over the config file.
    for key in ("eps", "solver", "mode", "K", "T", "lam", "seed"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.outer is not None:
        data["outer"] = args.outer
    if args.out is not None:
        data["out_dir"] = args.out
    return RunConfig.from_dict(data)


def cmd_solve(args) -> int:
    report = run(_load_config(args))
    print(json.dumps({
        "problem": report.problem,
        "verdict": report.verdict,
        "best_x": report.best_x,
        "best_y": report.best_y,
        "best_theta": report.best_theta,
        "best_alpha": report.best_alpha,
        "iterations": report.iterations,
        "wall_time_s": round(report.wall_time_s, 4),
    }, indent=2))
    return 0 if report.verdict else 1


def cmd_check_grad(args) -> int:
    problem = make_problem({"name": args.problem})
    res = check_gradients(problem, n_points=args.points, seed=args.seed)
    lip = estimate_lipschitz(problem, samples=100, seed=args.seed)
    ok = res.worst <= GRAD_TOL
    print(f"{problem.name}: theta rel err {res.theta_error:.3e}, alpha rel err "
          f"{res.alpha_error:.3e} -> {'PASS' if ok else 'FAIL'}")
    print(f"sampled Lipschitz l11={lip.l11:.4g} l12={lip.l12:.4g} l22={lip.l22:.4g} "
          f"(declared {problem.l11:.4g}, {problem.l12:.4g}, {problem.l22:.4g})")
    for w in lip.warnings:
        print(f"warning: {w}")
    return 0 if ok else 1


def cmd_bench(args) -> int:
    with open(args.suite) as fh:
        suite = json.load(fh)
    results = run_suite(suite, out_dir=args.out, jobs=args.jobs)
    failed = 0
    for r in results:
        status = r.get("status", "error")
        failed += status != "ok"
        if status == "ok":
            print(f"{r['problem']:24s} ok     verdict={r['verdict']} "
                  f"X={r['best_x']:.3e} Y={r['best_y']:.3e}")
        else:
            print(f"{r['config'].get('out_dir', '?'):24s} error  {r.get('error')}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minimax-solve",
                                     description="First-order solvers for smooth min-max games.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configured solve")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--problem", choices=BUILTIN_PROBLEMS)
    p.add_argument("--eps", type=float)
    p.add_argument("--solver", choices=("pl", "ncc"))
    p.add_argument("--mode", choices=("theory", "practical"))
    p.add_argument("--outer", choices=("pgd", "fw"))
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for trajectory.csv and report.json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check-grad", help="finite-difference check of a built-in oracle")
    p.add_argument("--problem", required=True, choices=BUILTIN_PROBLEMS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=cmd_check_grad)

    p = sub.add_parser("bench", help="run a suite of configurations")
    p.add_argument("--suite", required=True, help="JSON file with a 'runs' list")
    p.add_argument("--out", help="base output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RuntimeError as exc:
        print(f"minimax-solve: {exc}", file=sys.stderr)
        return 1
    except (InvalidInputError, ConfigurationError, OSError, json.JSONDecodeError) as exc:
        print(f"minimax-solve: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
