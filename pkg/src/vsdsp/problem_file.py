"""Line-oriented problem declarations.

One statement per line, ``#`` starts a comment::

    name        demo
    continuous  x1 0 100            # name lower upper
    discrete    z1 0 1 2            # name level codes...
    dimensional w1 0 1
    activate    x1 w1 1             # variable controller active levels...
    constraint  g1                  # always active
    constraint  g2 w1=0             # active when w1 is 0 (comma lists allowed: w1=0,1)
    exclude     w1=1 w2=0           # drop one dimensional combination
    evaluator   mypkg.module:func   # (point) -> (f, {constraint: g})
    batch       mypkg.module:func   # optional vectorized evaluator

Variables without an ``activate`` line are always active.
"""

from __future__ import annotations

import importlib
from pathlib import Path

from .design_space import (
    ActivationRule,
    ConstraintSpec,
    ContinuousVar,
    DesignSpaceError,
    DimensionalVar,
    DiscreteVar,
    ProblemDefinition,
)

__all__ = ["load_problem_file", "parse_problem"]


def _import(target: str, where: str):
    module, _, attr = target.partition(":")
    if not module or not attr:
        raise DesignSpaceError(f"{where}: expected 'module:function', got {target!r}")
    try:
        return getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise DesignSpaceError(f"{where}: cannot import {target!r}: {exc}") from None


def _assignments(tokens: list[str], where: str) -> dict[str, frozenset[int]]:
    out = {}
    for tok in tokens:
        name, eq, levels = tok.partition("=")
        if not eq or not levels:
            raise DesignSpaceError(f"{where}: expected name=level[,level...], got {tok!r}")
        out[name] = frozenset(int(v) for v in levels.split(","))
    return out


def parse_problem(text: str, source: str = "<string>") -> ProblemDefinition:
    name = Path(source).stem
    cont, disc, dims, rules, cons, excl = [], [], [], [], [], []
    evaluator = batch = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        key, *args = line.split()
        try:
            if key == "name" and len(args) == 1:
                name = args[0]
            elif key == "continuous" and len(args) == 3:
                cont.append(ContinuousVar(args[0], float(args[1]), float(args[2])))
            elif key == "discrete" and len(args) >= 3:
                disc.append(DiscreteVar(args[0], tuple(int(v) for v in args[1:])))
            elif key == "dimensional" and len(args) >= 3:
                dims.append(DimensionalVar(args[0], tuple(int(v) for v in args[1:])))
            elif key == "activate" and len(args) >= 3:
                rules.append(ActivationRule(args[0], args[1], frozenset(int(v) for v in args[2:])))
            elif key == "constraint" and len(args) >= 1:
                cons.append(ConstraintSpec(args[0], _assignments(args[1:], where)))
            elif key == "exclude" and args:
                ex = _assignments(args, where)
                if any(len(v) != 1 for v in ex.values()):
                    raise DesignSpaceError(f"{where}: an exclusion names one level per variable")
                excl.append({k: next(iter(v)) for k, v in ex.items()})
            elif key == "evaluator" and len(args) == 1:
                evaluator = _import(args[0], where)
            elif key == "batch" and len(args) == 1:
                batch = _import(args[0], where)
            else:
                raise DesignSpaceError(f"{where}: cannot parse {raw.strip()!r}")
        except ValueError as exc:
            if isinstance(exc, DesignSpaceError):
                raise
            raise DesignSpaceError(f"{where}: {exc}") from None
    return ProblemDefinition(
        name=name,
        continuous=tuple(cont),
        discrete=tuple(disc),
        dimensional=tuple(dims),
        activation=tuple(rules),
        constraints=tuple(cons),
        exclusions=tuple(excl),
        evaluator=evaluator,
        batch_evaluator=batch,
    )


def load_problem_file(path: str | Path) -> ProblemDefinition:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DesignSpaceError(f"cannot read problem file {path}: {exc}") from None
    return parse_problem(text, str(path))
