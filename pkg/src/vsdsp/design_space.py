"""Variable-size design spaces.

A problem declares continuous, discrete and dimensional variables. Each
continuous or discrete variable is either shared (always active) or owned by
exactly one dimensional variable through an :class:`ActivationRule`. Fixing
every dimensional variable yields a fixed-size :class:`SubProblem`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

__all__ = [
    "ActivationRule",
    "ConstraintSpec",
    "ContinuousVar",
    "DesignPoint",
    "DesignSpaceError",
    "DimensionalVar",
    "DiscreteVar",
    "Evaluation",
    "InvalidPointError",
    "ProblemDefinition",
    "SubProblem",
    "count_categories",
    "count_global_categories",
    "enumerate_sub_problems",
    "validate_point",
]


class DesignSpaceError(ValueError):
    """Raised for an inconsistent problem declaration."""


class InvalidPointError(DesignSpaceError):
    """Raised when a point does not belong to the design space."""


@dataclass(frozen=True)
class ContinuousVar:
    name: str
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DesignSpaceError(f"{self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise DesignSpaceError(f"{self.name}: lower bound must be below upper bound")


@dataclass(frozen=True)
class DiscreteVar:
    """Unordered discrete variable; level codes carry no ordinal meaning."""

    name: str
    levels: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if len(self.levels) < 2:
            raise DesignSpaceError(f"{self.name}: at least two levels are required")
        if len(set(self.levels)) != len(self.levels):
            raise DesignSpaceError(f"{self.name}: level codes must be distinct")

    def index(self, level: int) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise InvalidPointError(f"{self.name}: unknown level {level!r}") from None


@dataclass(frozen=True)
class DimensionalVar(DiscreteVar):
    """Discrete variable whose value switches other variables on and off."""


@dataclass(frozen=True)
class ActivationRule:
    variable: str
    controller: str
    active_levels: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "active_levels", frozenset(int(v) for v in self.active_levels))
        if not self.active_levels:
            raise DesignSpaceError(f"{self.variable}: empty activation level set")


@dataclass(frozen=True)
class ConstraintSpec:
    """A constraint ``g <= 0``, active when every listed controller is at an allowed level."""

    name: str
    active_when: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "active_when", {k: frozenset(int(v) for v in lv) for k, lv in self.active_when.items()}
        )

    def is_active(self, w: Mapping[str, int]) -> bool:
        return all(w[name] in levels for name, levels in self.active_when.items())


@dataclass(frozen=True)
class SubProblem:
    id: int
    w: tuple[tuple[str, int], ...]
    active_continuous: tuple[str, ...]
    active_discrete: tuple[str, ...]
    active_constraints: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.active_continuous) + len(self.active_discrete)

    @property
    def w_dict(self) -> dict[str, int]:
        return dict(self.w)

    def __str__(self) -> str:
        ws = ",".join(f"{k}={v}" for k, v in self.w)
        return f"SP{self.id}({ws})"


@dataclass(frozen=True)
class DesignPoint:
    """A candidate solution. Inactive variables are absent, not imputed."""

    w: Mapping[str, int]
    x: Mapping[str, float] = field(default_factory=dict)
    z: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Evaluation:
    objective: float
    constraints: Mapping[str, float]

    @property
    def feasible(self) -> bool:
        return all(g <= 0.0 for g in self.constraints.values())


# (point) -> (objective, {active constraint name: value})
Evaluator = Callable[[DesignPoint], "tuple[float, Mapping[str, float]]"]
# (sub-problem, X[n, n_x] in problem units, Z[n, n_z] level codes) -> (f[n], G[n, n_g])
BatchEvaluator = Callable[["SubProblem", "object", "object"], "tuple[object, object]"]


@dataclass(frozen=True, eq=False)
class ProblemDefinition:
    """A variable-size design space problem.

    Sub-problems are materialized on first access and ordered
    lexicographically over the dimensional variables in declaration order
    (the first declared dimensional variable is the most significant key).
    """

    name: str
    continuous: tuple[ContinuousVar, ...] = ()
    discrete: tuple[DiscreteVar, ...] = ()
    dimensional: tuple[DimensionalVar, ...] = ()
    activation: tuple[ActivationRule, ...] = ()
    constraints: tuple[ConstraintSpec, ...] = ()
    exclusions: tuple[Mapping[str, int], ...] = ()
    evaluator: Evaluator | None = None
    batch_evaluator: BatchEvaluator | None = None

    def __post_init__(self) -> None:
        for attr in ("continuous", "discrete", "dimensional", "activation", "constraints", "exclusions"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        names = [v.name for v in (*self.continuous, *self.discrete, *self.dimensional)]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise DesignSpaceError(f"duplicate variable names: {sorted(dupes)}")
        if not self.dimensional:
            raise DesignSpaceError("at least one dimensional variable is required")
        dims = {d.name: d for d in self.dimensional}
        optional = {v.name for v in (*self.continuous, *self.discrete)}
        seen: set[str] = set()
        for rule in self.activation:
            if rule.variable not in optional:
                raise DesignSpaceError(f"activation rule for unknown variable {rule.variable!r}")
            if rule.variable in seen:
                raise DesignSpaceError(f"{rule.variable}: more than one activation rule (single controller required)")
            seen.add(rule.variable)
            if rule.controller not in dims:
                raise DesignSpaceError(f"{rule.variable}: unknown controller {rule.controller!r}")
            if not rule.active_levels <= set(dims[rule.controller].levels):
                raise DesignSpaceError(f"{rule.variable}: active levels outside {rule.controller}")
        cnames = [c.name for c in self.constraints]
        if len(set(cnames)) != len(cnames):
            raise DesignSpaceError("duplicate constraint names")
        for c in self.constraints:
            for ctrl, levels in c.active_when.items():
                if ctrl not in dims or not levels <= set(dims[ctrl].levels):
                    raise DesignSpaceError(f"constraint {c.name}: bad activity declaration")
        for ex in self.exclusions:
            if set(ex) != set(dims):
                raise DesignSpaceError("exclusions must assign every dimensional variable")
            for k, v in ex.items():
                dims[k].index(v)
        # materialize eagerly so declaration errors surface at construction
        _ = self.sub_problems

    # -- lookups -----------------------------------------------------------

    @cached_property
    def variables(self) -> dict[str, ContinuousVar | DiscreteVar]:
        return {v.name: v for v in (*self.continuous, *self.discrete, *self.dimensional)}

    @cached_property
    def rules(self) -> dict[str, ActivationRule]:
        return {r.variable: r for r in self.activation}

    @property
    def shared_continuous(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.continuous if v.name not in self.rules)

    @property
    def shared_discrete(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.discrete if v.name not in self.rules)

    def is_active(self, variable: str, w: Mapping[str, int]) -> bool:
        rule = self.rules.get(variable)
        return rule is None or w[rule.controller] in rule.active_levels

    @cached_property
    def sub_problems(self) -> tuple[SubProblem, ...]:
        return tuple(enumerate_sub_problems(self))

    @cached_property
    def _sp_index(self) -> dict[tuple[int, ...], SubProblem]:
        return {tuple(v for _, v in sp.w): sp for sp in self.sub_problems}

    def sub_problem_for(self, w: Mapping[str, int]) -> SubProblem:
        try:
            key = tuple(w[d.name] for d in self.dimensional)
        except KeyError as exc:
            raise InvalidPointError(f"missing dimensional variable {exc.args[0]!r}") from None
        for d, v in zip(self.dimensional, key):
            d.index(v)
        try:
            return self._sp_index[key]
        except KeyError:
            raise InvalidPointError(f"excluded dimensional combination {dict(w)}") from None

    @property
    def n_sub_problems(self) -> int:
        return len(self.sub_problems)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, point: DesignPoint) -> Evaluation:
        sp = self.sub_problems[validate_point(self, point)]
        if self.evaluator is None:
            raise DesignSpaceError(f"problem {self.name!r} has no evaluator")
        f, g = self.evaluator(point)
        g = {k: float(v) for k, v in g.items()}
        if set(g) != set(sp.active_constraints):
            raise DesignSpaceError(
                f"evaluator returned constraints {sorted(g)}, expected {list(sp.active_constraints)} for {sp}"
            )
        f = float(f)
        if not math.isfinite(f) or not all(math.isfinite(v) for v in g.values()):
            raise DesignSpaceError(f"non-finite evaluation at {point}")
        return Evaluation(f, {k: g[k] for k in sp.active_constraints})


def enumerate_sub_problems(problem: ProblemDefinition) -> list[SubProblem]:
    """One sub-problem per non-excluded combination of dimensional levels."""
    excluded = {tuple(ex[d.name] for d in problem.dimensional) for ex in problem.exclusions}
    out: list[SubProblem] = []
    for combo in itertools.product(*(d.levels for d in problem.dimensional)):
        if combo in excluded:
            continue
        w = {d.name: lv for d, lv in zip(problem.dimensional, combo)}
        cont = tuple(v.name for v in problem.continuous if problem.is_active(v.name, w))
        disc = tuple(v.name for v in problem.discrete if problem.is_active(v.name, w))
        if not cont and not disc:
            raise DesignSpaceError(f"dimensional combination {w} leaves no active variable")
        cons = tuple(c.name for c in problem.constraints if c.is_active(w))
        out.append(SubProblem(len(out), tuple(w.items()), cont, disc, cons))
    if not out:
        raise DesignSpaceError("every dimensional combination is excluded")
    return out


def count_categories(problem: ProblemDefinition, sub_problem: SubProblem) -> int:
    """Number of discrete categories of a sub-problem (product of active level counts)."""
    return math.prod(len(problem.variables[name].levels) for name in sub_problem.active_discrete)


def count_global_categories(problem: ProblemDefinition) -> int:
    """Number of fixed-size continuous problems spanned by the whole space."""
    return sum(count_categories(problem, sp) for sp in problem.sub_problems)


def validate_point(problem: ProblemDefinition, point: DesignPoint) -> int:
    """Return the id of the sub-problem ``point`` belongs to, or raise InvalidPointError."""
    if set(point.w) != {d.name for d in problem.dimensional}:
        raise InvalidPointError("point must assign exactly the dimensional variables")
    sp = problem.sub_problem_for(point.w)
    for given, active, kind in (
        (point.x, sp.active_continuous, "continuous"),
        (point.z, sp.active_discrete, "discrete"),
    ):
        for name in given:
            if name not in problem.variables:
                raise InvalidPointError(f"unknown variable {name!r}")
            if name not in active:
                raise InvalidPointError(f"value supplied for inactive variable {name!r}")
        missing = [n for n in active if n not in given]
        if missing:
            raise InvalidPointError(f"missing {kind} value(s) for {missing}")
    for name, value in point.x.items():
        var = problem.variables[name]
        if not isinstance(var, ContinuousVar):
            raise InvalidPointError(f"{name!r} is not continuous")
        if not (var.lower <= value <= var.upper):
            raise InvalidPointError(f"{name}={value} outside [{var.lower}, {var.upper}]")
    for name, value in point.z.items():
        var = problem.variables[name]
        if not isinstance(var, DiscreteVar):
            raise InvalidPointError(f"{name!r} is not discrete")
        var.index(value)
    return sp.id


def make_point(sub_problem: SubProblem, x: Sequence[float] = (), z: Sequence[int] = ()) -> DesignPoint:
    """Build a point from values ordered like the sub-problem's active variables."""
    if len(x) != len(sub_problem.active_continuous) or len(z) != len(sub_problem.active_discrete):
        raise InvalidPointError(f"wrong number of values for {sub_problem}")
    return DesignPoint(
        w=sub_problem.w_dict,
        x={n: float(v) for n, v in zip(sub_problem.active_continuous, x)},
        z={n: int(v) for n, v in zip(sub_problem.active_discrete, z)},
    )
