"""Expected Improvement, Expected Violation and their constrained optimization.

Infill points maximize EI subject to ``EV_i <= t_i`` for every active
constraint. EV is compared with its threshold in standardized constraint
units (EV divided by the constraint model's response scale), so one default
tolerance suits constraints of any magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import ndtr

from .design_space import DesignPoint, SubProblem
from .ga import GAConfig, GAResult, Scores, ga_minimize
from .surrogate import TrainedSurrogate, predict, predict_columns

__all__ = [
    "DEFAULT_THRESHOLD",
    "AcquisitionContext",
    "GAConfig",
    "InfillResult",
    "ei_values",
    "ev_values",
    "expected_improvement",
    "expected_violation",
    "feasibility_search",
    "optimize_infill",
    "search_infill",
]

DEFAULT_THRESHOLD = 1e-3
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _pdf(u):
    return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def ei_values(mean, sd, y_min) -> np.ndarray:
    """Closed-form EI for arrays of predictive means and standard deviations."""
    mean, sd = np.broadcast_arrays(np.asarray(mean, float), np.asarray(sd, float))
    gap = y_min - mean
    pos = sd > 0
    safe = np.where(pos, sd, 1.0)
    u = gap / safe
    ei = np.where(pos, gap * ndtr(u) + sd * _pdf(u), np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0)


def ev_values(mean, sd) -> np.ndarray:
    """Closed-form expected violation of ``g <= 0``."""
    mean, sd = np.broadcast_arrays(np.asarray(mean, float), np.asarray(sd, float))
    pos = sd > 0
    safe = np.where(pos, sd, 1.0)
    u = mean / safe
    ev = np.where(pos, mean * ndtr(u) + sd * _pdf(u), np.maximum(mean, 0.0))
    return np.maximum(ev, 0.0)


@dataclass(frozen=True)
class AcquisitionContext:
    objective: TrainedSurrogate
    constraints: Mapping[str, TrainedSurrogate] = field(default_factory=dict)
    y_min: float | None = None
    thresholds: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if any(t < 0 for t in self.thresholds.values()):
            raise ValueError("EV thresholds must be non-negative")

    def threshold(self, name: str) -> float:
        return self.thresholds.get(name, DEFAULT_THRESHOLD)


def expected_improvement(ctx: AcquisitionContext, point: DesignPoint) -> float:
    if ctx.y_min is None:
        raise ValueError("EI needs a feasible incumbent")
    mean, var = predict(ctx.objective, point)
    return float(ei_values(mean, np.sqrt(var), ctx.y_min))


def expected_violation(model: TrainedSurrogate, point: DesignPoint, i: str | None = None) -> float:
    """EV of one constraint model at ``point`` (``i`` is informational)."""
    mean, var = predict(model, point)
    return float(ev_values(mean, np.sqrt(var)))


@dataclass(frozen=True)
class InfillResult:
    point: DesignPoint
    ei: float
    total_ev: float  # standardized units
    excess: float  # sum of max(EV_i - t_i, 0), standardized units
    sub_problem: int

    @property
    def ev_feasible(self) -> bool:
        return self.excess <= 0.0


class _Space:
    """Batch evaluation of predictions over one sub-problem's encoded genes."""

    def __init__(self, ctx: AcquisitionContext, sp: SubProblem):
        self.ctx, self.sp = ctx, sp
        self.encoder = ctx.objective.kernel.encoder
        problem = self.encoder.problem
        self.n_x = len(sp.active_continuous)
        self.levels = [len(problem.variables[n].levels) for n in sp.active_discrete]
        missing = [c for c in sp.active_constraints if c not in ctx.constraints]
        if missing:
            raise ValueError(f"no model for constraint(s) {missing} of {sp}")
        self.cons = [(name, ctx.constraints[name], ctx.threshold(name)) for name in sp.active_constraints]

    def columns(self, U, Z):
        return self.encoder.sub_problem_columns(self.sp.id, U, Z)

    def objective(self, X):
        mean, var = predict_columns(self.ctx.objective, X)
        return mean, np.sqrt(var)

    def violation(self, X):
        """(total EV, excess) in standardized constraint units."""
        total = np.zeros(X.n)
        excess = np.zeros(X.n)
        for _, model, t in self.cons:
            mean, var = predict_columns(model, X)
            ev = ev_values(mean, np.sqrt(var)) / model.y_std
            total += ev
            excess += np.maximum(ev - t, 0.0)
        return total, excess

    def decode(self, res: GAResult) -> DesignPoint:
        return self.encoder.decode(self.sp.id, res.u, res.z)


def _rng(config: GAConfig, rng):
    if rng is not None:
        return rng
    return np.random.default_rng(config.seed)


def search_infill(
    ctx: AcquisitionContext,
    sub_problem: SubProblem,
    config: GAConfig = GAConfig(),
    rng: np.random.Generator | None = None,
) -> InfillResult:
    """Maximize EI under the EV constraints over one fixed-size sub-problem."""
    if ctx.y_min is None:
        raise ValueError("EI needs a feasible incumbent; use feasibility_search")
    space = _Space(ctx, sub_problem)

    def evaluate(U, Z):
        X = space.columns(U, Z)
        mean, sd = space.objective(X)
        ei = ei_values(mean, sd, ctx.y_min)
        if space.cons:
            total, excess = space.violation(X)
        else:
            total = excess = np.zeros(len(U))
        return Scores(-ei, excess, total)

    res = ga_minimize(evaluate, space.n_x, space.levels, config, _rng(config, rng))
    return InfillResult(space.decode(res), -res.obj, res.tie, res.excess, sub_problem.id)


def optimize_infill(ctx, sub_problem, config: GAConfig = GAConfig(), rng=None) -> DesignPoint:
    return search_infill(ctx, sub_problem, config, rng).point


def feasibility_search(
    ctx: AcquisitionContext,
    sub_problem: SubProblem,
    config: GAConfig = GAConfig(),
    rng: np.random.Generator | None = None,
) -> InfillResult:
    """Minimize the total expected violation (used before any feasible sample exists)."""
    space = _Space(ctx, sub_problem)

    def evaluate(U, Z):
        X = space.columns(U, Z)
        total, excess = space.violation(X)
        return Scores(total, np.zeros(len(U)), excess)

    res = ga_minimize(evaluate, space.n_x, space.levels, config, _rng(config, rng))
    # report the excess of the returned point with the usual meaning
    total, excess = space.violation(space.columns(res.u[None], res.z[None]))
    return InfillResult(space.decode(res), 0.0, float(total[0]), float(excess[0]), sub_problem.id)


def scenario_archive(
    ctx: AcquisitionContext,
    sub_problem: SubProblem,
    a: float,
    config: GAConfig = GAConfig(),
    rng: np.random.Generator | None = None,
):
    """Pool the individuals of three GA runs (on y-a s, y+a s and y) under the EV constraints.

    Returns predictive mean, standard deviation and strict EV feasibility
    (every ``EV_i < t_i``) for all archived individuals.
    """
    space = _Space(ctx, sub_problem)
    rng = _rng(config, rng)
    Us, Zs = [], []
    for sign in (-1.0, 1.0, 0.0):

        def evaluate(U, Z, sign=sign):
            X = space.columns(U, Z)
            mean, sd = space.objective(X)
            if space.cons:
                total, excess = space.violation(X)
            else:
                total = excess = np.zeros(len(U))
            return Scores(mean + sign * a * sd, excess, total)

        res = ga_minimize(evaluate, space.n_x, space.levels, config, rng, keep_archive=True)
        Us.append(res.archive_U)
        Zs.append(res.archive_Z)
    U, Z = np.vstack(Us), np.vstack(Zs)
    X = space.columns(U, Z)
    mean, sd = space.objective(X)
    feasible = np.ones(len(U), dtype=bool)
    for _, model, t in space.cons:
        m, v = predict_columns(model, X)
        feasible &= ev_values(m, np.sqrt(v)) / model.y_std < t
    return mean, sd, feasible, (U, Z)
