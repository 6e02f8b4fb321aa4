"""Command-line entry point.

``vsdsp run`` executes repeated optimizations and writes traces,
``vsdsp compare`` ranks trace directories, ``vsdsp oracle`` prints the
reference optimum of every sub-problem. Every ``run`` flag can also be set
through an environment variable ``VSDSP_<FLAG>`` (upper case, dashes as
underscores, e.g. ``VSDSP_INIT_SIZE``); command-line flags win.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .design_space import DesignSpaceError
from .experiment import ConfigError, ExperimentConfig, compare_runs, load_problem, run_experiment
from .strategies import EvaluationError
from .surrogate import FitError

ENV_PREFIX = "VSDSP_"


class _ConfigExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _ConfigExit(f"{self.prog}: error: {message}")


def _env(flag: str, default=None):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), default)


def _threshold(text: str) -> tuple[str, float]:
    name, eq, value = text.partition("=")
    if not eq:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vsdsp", description="Bayesian optimization of variable-size design-space problems")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run repeated optimizations and write traces")
    r.add_argument("--problem", default=_env("problem"), help="goldstein, rosenbrock or a problem file")
    r.add_argument("--method", default=_env("method"), choices=["io", "ba", "spw", "dvw"])
    r.add_argument("--kernel", default=_env("kernel", "cs"), choices=["cs", "lv"])
    r.add_argument("--a", type=float, default=float(_env("a", 2.0)), help="scenario multiplier (ba)")
    r.add_argument("--init-size", type=int, default=_env("init_size"))
    r.add_argument("--budget", type=int, default=_env("budget", 0))
    r.add_argument("--reps", type=int, default=_env("reps", 1))
    r.add_argument("--seed", type=int, default=_env("seed", 0))
    r.add_argument("--jobs", type=int, default=_env("jobs", 1))
    r.add_argument("--t-ev", type=_threshold, action="append", default=None, metavar="NAME=VALUE")
    r.add_argument("--ga-pop", type=int, default=_env("ga_pop"))
    r.add_argument("--ga-gens", type=int, default=_env("ga_gens", 50))
    r.add_argument("--out", default=_env("out"), metavar="DIR")
    r.add_argument("-v", "--verbose", action="store_true")

    c = sub.add_parser("compare", help="rank trace directories")
    c.add_argument("dirs", nargs="+")
    c.add_argument("--reference", type=float, default=None, help="optimum for evaluations-to-within-5%%")

    o = sub.add_parser("oracle", help="reference optimum per sub-problem")
    o.add_argument("--problem", default=_env("problem"))
    o.add_argument("--effort", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    return p


def _env_thresholds():
    raw = _env("t_ev")
    if not raw:
        return []
    return [_threshold(t) for t in raw.split(",") if t]


def _int_or_none(v):
    return None if v is None else int(v)


def _run(args) -> int:
    if not args.problem or not args.method:
        raise ConfigError("--problem and --method are required")
    thresholds = dict(args.t_ev if args.t_ev is not None else _env_thresholds())
    config = ExperimentConfig(
        problem=args.problem,
        method=args.method,
        kernel=args.kernel,
        a=args.a,
        init_size=_int_or_none(args.init_size),
        budget=int(args.budget),
        repetitions=int(args.reps),
        seed=int(args.seed),
        thresholds=thresholds,
        ga_pop=_int_or_none(args.ga_pop),
        ga_gens=int(args.ga_gens),
        out=args.out,
        jobs=int(args.jobs),
    )
    summary, _ = run_experiment(config)
    print(f"{summary.label}: median {summary.median:.6g}  IQR {summary.iqr:.6g}  outliers {list(summary.outliers)}")
    for r in summary.reps:
        first = "none" if math.isinf(r.evals_to_first_feasible) else int(r.evals_to_first_feasible)
        print(f"  rep {r.rep}: best {r.final_best:.6g}  first feasible at {first}  sub-problem {r.converged_sub_problem}")
    return 0


def _compare(args) -> int:
    print(json.dumps(compare_runs(args.dirs, args.reference), indent=2))
    return 0


def _oracle(args) -> int:
    from .benchmarks import reference_optimum

    problem = load_problem(args.problem)
    for sp in problem.sub_problems:
        r = reference_optimum(problem, sp, args.effort, args.seed)
        print(f"{sp}: {'infeasible' if not r.feasible else f'{r.f:.10g}'}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING)
        return {"run": _run, "compare": _compare, "oracle": _oracle}[args.command](args)
    except _ConfigExit as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ConfigError, DesignSpaceError, ValueError) as exc:
        print(f"vsdsp: configuration error: {exc}", file=sys.stderr)
        return 1
    except (FitError, EvaluationError, OSError, RuntimeError) as exc:
        print(f"vsdsp: runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
