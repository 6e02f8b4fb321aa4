"""Optimization drivers over a fixed global budget of true evaluations.

* ``run_io``: independent mixed-variable BO of every sub-problem, the budget
  split in proportion to sub-problem dimension.
* ``run_somvsp``: per-sub-problem BO with scenario-based discarding of
  unpromising sub-problems and performance-weighted budget allocation.
* ``run_vskernel_bo``: one surrogate per function over the whole
  variable-size space (SPW or DVW kernel), with one acquisition search per
  sub-problem and the best candidate evaluated.

All stochastic steps draw, in a fixed order, from one generator built from
``seed``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .acquisition import AcquisitionContext, InfillResult, feasibility_search, scenario_archive, search_infill
from .design_space import DesignPoint, Evaluation, ProblemDefinition, SubProblem
from .ga import GAConfig
from .surrogate import Dataset, TrainedSurrogate, fit
from .vskernels import VSKernel, build_dvw, build_mixed, build_spw

__all__ = [
    "BudgetAllocation",
    "EvaluationError",
    "RunRecord",
    "ScenarioValues",
    "TraceRow",
    "allocate",
    "budget_split",
    "compute_scenarios",
    "discard",
    "round_half_up",
    "run_io",
    "run_somvsp",
    "run_vskernel_bo",
]

log = logging.getLogger(__name__)


class EvaluationError(RuntimeError):
    pass


# -- run record ---------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    evaluations: int
    iteration: int
    point: DesignPoint
    objective: float
    constraints: Mapping[str, float]
    feasible: bool
    best_feasible: float  # inf until a feasible point exists
    sub_problem: int
    remaining_sub_problems: int


@dataclass
class RunRecord:
    method: str
    n_sub_problems: int
    rows: list[TraceRow] = field(default_factory=list)
    discarded: list[tuple[int, int]] = field(default_factory=list)  # (iteration, sub-problem)
    models: list[dict] = field(default_factory=list)

    @property
    def best_feasible(self) -> float:
        return self.rows[-1].best_feasible if self.rows else math.inf

    @property
    def incumbent(self) -> TraceRow | None:
        best = None
        for r in self.rows:
            if r.feasible and (best is None or r.objective < best.objective):
                best = r
        return best

    def add(self, point, ev: Evaluation, sp: int, iteration: int, remaining: int) -> TraceRow:
        best = self.best_feasible
        if ev.feasible:
            best = min(best, ev.objective)
        row = TraceRow(len(self.rows) + 1, iteration, point, ev.objective, dict(ev.constraints), ev.feasible, best, sp, remaining)
        self.rows.append(row)
        return row


def _evaluate(problem: ProblemDefinition, point: DesignPoint) -> Evaluation:
    try:
        return problem.evaluate(point)
    except Exception as exc:
        raise EvaluationError(f"evaluation failed at {point}: {exc}") from exc


# -- models -------------------------------------------------------------------


@dataclass
class _Store:
    """True evaluations gathered so far."""

    points: list[DesignPoint] = field(default_factory=list)
    evals: list[Evaluation] = field(default_factory=list)
    sps: list[int] = field(default_factory=list)

    def add(self, point, ev, sp):
        self.points.append(point)
        self.evals.append(ev)
        self.sps.append(sp)

    def indices(self, sps: set[int] | None = None) -> list[int]:
        return [i for i, s in enumerate(self.sps) if sps is None or s in sps]

    def y_min(self, sps: set[int] | None = None) -> float | None:
        vals = [self.evals[i].objective for i in self.indices(sps) if self.evals[i].feasible]
        return min(vals) if vals else None


def _fit_models(
    store: _Store,
    idx: list[int],
    kernel: VSKernel,
    constraint_names: Sequence[str],
    rng: np.random.Generator,
    record: RunRecord,
    iteration: int,
    tag: str,
) -> tuple[TrainedSurrogate, dict[str, TrainedSurrogate]]:
    pts = [store.points[i] for i in idx]
    obj = fit(Dataset(pts, [store.evals[i].objective for i in idx]), kernel, rng)
    record.models.append({"iteration": iteration, "model": f"{tag}:objective", "log_likelihood": obj.log_likelihood})
    cons = {}
    for name in constraint_names:
        # a constraint model only sees the points where that constraint exists
        sel = [i for i in idx if name in store.evals[i].constraints]
        ds = Dataset([store.points[i] for i in sel], [store.evals[i].constraints[name] for i in sel])
        cons[name] = fit(ds, kernel, rng)
        record.models.append({"iteration": iteration, "model": f"{tag}:{name}", "log_likelihood": cons[name].log_likelihood})
    return obj, cons


def _infill(ctx: AcquisitionContext, sp: SubProblem, ga: GAConfig, rng) -> InfillResult:
    if ctx.y_min is None:
        return feasibility_search(ctx, sp, ga, rng)
    return search_infill(ctx, sp, ga, rng)


def _start(problem, init_doe, method, remaining_fn) -> tuple[RunRecord, _Store]:
    record = RunRecord(method, problem.n_sub_problems)
    store = _Store()
    for p in init_doe:
        sp = problem.sub_problem_for(p.w).id
        ev = _evaluate(problem, p)
        store.add(p, ev, sp)
        record.add(p, ev, sp, 0, remaining_fn())
    return record, store


def _check_doe(problem, init_doe):
    covered = {problem.sub_problem_for(p.w).id for p in init_doe}
    missing = [q for q in range(problem.n_sub_problems) if q not in covered]
    if missing:
        raise ValueError(f"initial design misses sub-problem(s) {missing}")


# -- IO -------------------------------------------------------------------------


def budget_split(dims: Sequence[int], budget: int) -> list[int]:
    """``floor(budget d_q / sum d)`` each, leftovers to the largest ``d_q`` first (ties by id)."""
    dims = list(dims)
    total = sum(dims)
    out = [budget * d // total for d in dims]
    order = sorted(range(len(dims)), key=lambda q: (-dims[q], q))
    i = 0
    while sum(out) < budget:
        out[order[i % len(order)]] += 1
        i += 1
    return out


def _sub_problem_step(problem, store, record, sp, family, thresholds, ga, rng, iteration, remaining, models=None):
    """One BO infill restricted to sub-problem ``sp``; returns the new row."""
    kernel = build_mixed(problem, sp, family)
    idx = store.indices({sp.id})
    if models is None:
        models = _fit_models(store, idx, kernel, sp.active_constraints, rng, record, iteration, f"sp{sp.id}")
    obj, cons = models
    ctx = AcquisitionContext(obj, cons, store.y_min({sp.id}), thresholds)
    res = _infill(ctx, sp, ga, rng)
    ev = _evaluate(problem, res.point)
    store.add(res.point, ev, sp.id)
    return record.add(res.point, ev, sp.id, iteration, remaining)


def run_io(
    problem: ProblemDefinition,
    init_doe: Sequence[DesignPoint],
    budget: int,
    kernel: str = "cs",
    seed: int | np.random.Generator | None = None,
    ga: GAConfig = GAConfig(),
    thresholds: Mapping[str, float] | None = None,
) -> RunRecord:
    """Independent BO per sub-problem; infills are interleaved round-robin."""
    _check_doe(problem, init_doe)
    rng = np.random.default_rng(seed)
    thresholds = dict(thresholds or {})
    n_p = problem.n_sub_problems
    record, store = _start(problem, init_doe, "io", lambda: n_p)
    left = budget_split([sp.dim for sp in problem.sub_problems], budget)
    round_ = 0
    while any(left):
        round_ += 1
        for sp in problem.sub_problems:
            if left[sp.id] == 0:
                continue
            _sub_problem_step(problem, store, record, sp, kernel, thresholds, ga, rng, round_, n_p)
            left[sp.id] -= 1
    return record


# -- SOMVSP ---------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioValues:
    sub_problem: int
    bc: float | None
    wc: float | None
    nc: float | None
    a: float

    @property
    def defined(self) -> bool:
        return self.bc is not None


@dataclass(frozen=True)
class BudgetAllocation:
    budgets: Mapping[int, int]
    deltas: Mapping[int, float]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def compute_scenarios(
    models: tuple[TrainedSurrogate, Mapping[str, TrainedSurrogate]],
    sub_problem: SubProblem,
    a: float,
    ga: GAConfig = GAConfig(),
    rng: np.random.Generator | None = None,
    thresholds: Mapping[str, float] | None = None,
) -> ScenarioValues:
    """Best, worst and nominal case of a sub-problem from one pooled search archive."""
    obj, cons = models
    ctx = AcquisitionContext(obj, cons, None, dict(thresholds or {}))
    mean, sd, ok, _ = scenario_archive(ctx, sub_problem, a, ga, rng)
    if not ok.any():
        return ScenarioValues(sub_problem.id, None, None, None, a)
    m, s = mean[ok], sd[ok]
    return ScenarioValues(sub_problem.id, float(np.min(m - a * s)), float(np.min(m + a * s)), float(np.min(m)), a)


def discard(scenarios: Sequence[ScenarioValues]) -> set[int]:
    """Sub-problems whose best case is no better than another's worst case.

    Only defined scenarios take part, all judged against the same
    pre-iteration values; the sub-problem with the smallest worst case is
    always kept.
    """
    defined = [s for s in scenarios if s.defined]
    if len(defined) < 2:
        return set()
    keep = min(defined, key=lambda s: (s.wc, s.sub_problem)).sub_problem
    out = set()
    for q in defined:
        if q.sub_problem == keep:
            continue
        if any(p.sub_problem != q.sub_problem and q.bc >= p.wc for p in defined):
            out.add(q.sub_problem)
    return out


def allocate(scenarios: Sequence[ScenarioValues], dims: Mapping[int, int]) -> BudgetAllocation:
    """``B_q = round(d_q (1 + delta_q) / 2)``, at least one, from nominal-case ranking."""
    defined = [s for s in scenarios if s.defined]
    deltas: dict[int, float] = {}
    ncs = [s.nc for s in defined]
    spread = (max(ncs) - min(ncs)) if ncs else 0.0
    for s in scenarios:
        if not s.defined or spread <= 0:
            deltas[s.sub_problem] = 1.0
        else:
            deltas[s.sub_problem] = (max(ncs) - s.nc) / spread
    budgets = {q: max(1, round_half_up(dims[q] * (1 + d) / 2)) for q, d in deltas.items()}
    return BudgetAllocation(budgets, deltas)


def run_somvsp(
    problem: ProblemDefinition,
    init_doe: Sequence[DesignPoint],
    budget: int,
    kernel: str = "cs",
    a: float = 2.0,
    seed: int | np.random.Generator | None = None,
    ga: GAConfig = GAConfig(),
    thresholds: Mapping[str, float] | None = None,
) -> RunRecord:
    _check_doe(problem, init_doe)
    rng = np.random.default_rng(seed)
    thresholds = dict(thresholds or {})
    remaining = [sp.id for sp in problem.sub_problems]
    record, store = _start(problem, init_doe, "ba", lambda: len(remaining))
    used = 0
    iteration = 0
    while used < budget:
        iteration += 1
        models, scen = {}, []
        for q in remaining:
            sp = problem.sub_problems[q]
            kern = build_mixed(problem, sp, kernel)
            models[q] = _fit_models(
                store, store.indices({q}), kern, sp.active_constraints, rng, record, iteration, f"sp{q}"
            )
            scen.append(compute_scenarios(models[q], sp, a, ga, rng, thresholds))
        gone = discard(scen)
        for q in sorted(gone):
            record.discarded.append((iteration, q))
        remaining = [q for q in remaining if q not in gone]
        scen = [s for s in scen if s.sub_problem in remaining]
        alloc = allocate(scen, {q: problem.sub_problems[q].dim for q in remaining})
        plan = dict(alloc.budgets)
        left = budget - used
        if sum(plan.values()) > left:
            # not enough budget: serve the most promising sub-problems first
            order = sorted(remaining, key=lambda q: (-alloc.deltas[q], q))
            trimmed = {}
            for q in order:
                trimmed[q] = min(plan[q], left)
                left -= trimmed[q]
            plan = trimmed
        log.debug("iteration %d: remaining %s, plan %s", iteration, remaining, plan)
        for q in remaining:
            sp = problem.sub_problems[q]
            for b in range(plan.get(q, 0)):
                # the scenario models already match the data for the first infill
                pre = models[q] if b == 0 else None
                _sub_problem_step(
                    problem, store, record, sp, kernel, thresholds, ga, rng, iteration, len(remaining), pre
                )
                used += 1
    return record


# -- variable-size kernel BO ----------------------------------------------------


def run_vskernel_bo(
    problem: ProblemDefinition,
    init_doe: Sequence[DesignPoint],
    budget: int,
    method: str = "dvw",
    kernel: str = "cs",
    seed: int | np.random.Generator | None = None,
    ga: GAConfig = GAConfig(),
    thresholds: Mapping[str, float] | None = None,
) -> RunRecord:
    _check_doe(problem, init_doe)
    builders = {"spw": build_spw, "dvw": build_dvw}
    if method not in builders:
        raise ValueError(f"unknown variable-size kernel {method!r}")
    kern = builders[method](problem, kernel)
    rng = np.random.default_rng(seed)
    thresholds = dict(thresholds or {})
    n_p = problem.n_sub_problems
    record, store = _start(problem, init_doe, method, lambda: n_p)
    names = [c.name for c in problem.constraints]
    for it in range(1, budget + 1):
        obj, cons = _fit_models(store, store.indices(), kern, names, rng, record, it, method)
        ctx = AcquisitionContext(obj, cons, store.y_min(), thresholds)
        results = [_infill(ctx, sp, ga, rng) for sp in problem.sub_problems]
        if ctx.y_min is None:
            best = min(results, key=lambda r: (r.total_ev, r.sub_problem))
        else:
            ok = [r for r in results if r.ev_feasible]
            if ok:
                best = max(ok, key=lambda r: (r.ei, -r.sub_problem))
            else:
                best = min(results, key=lambda r: (r.excess, r.sub_problem))
        ev = _evaluate(problem, best.point)
        store.add(best.point, ev, best.sub_problem)
        record.add(best.point, ev, best.sub_problem, it, n_p)
    return record
