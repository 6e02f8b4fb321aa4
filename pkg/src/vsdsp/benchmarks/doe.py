"""Initial designs: one Latin hypercube over the global space, split by sub-problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from ..design_space import DesignPoint, DesignSpaceError, ProblemDefinition

__all__ = ["DoE", "DoESpec", "doe_counts", "generate_doe"]


def doe_counts(problem: ProblemDefinition, n: int) -> list[int]:
    """Samples per sub-problem, proportional to its dimension.

    Each sub-problem gets ``floor(n d_q / sum d)``; leftovers go one at a
    time to the largest sub-problems first (ties by id). Every count is at
    least one.
    """
    sps = problem.sub_problems
    if n < len(sps):
        raise DesignSpaceError(f"need at least {len(sps)} samples (one per sub-problem), got {n}")
    dims = np.array([sp.dim for sp in sps])
    counts = (n * dims) // dims.sum()
    counts = np.maximum(counts, 1)
    order = sorted(range(len(sps)), key=lambda q: (-dims[q], q))
    i = 0
    while counts.sum() < n:
        counts[order[i % len(order)]] += 1
        i += 1
    while counts.sum() > n:
        # only reachable when the floor of one forced extra samples
        for q in reversed(order):
            if counts[q] > 1 and counts.sum() > n:
                counts[q] -= 1
    return [int(c) for c in counts]


@dataclass(frozen=True)
class DoESpec:
    counts: tuple[int, ...]
    seed: int | None = None


@dataclass(frozen=True)
class DoE:
    points: tuple[DesignPoint, ...]
    sub_problem_ids: tuple[int, ...]
    unit: np.ndarray  # the raw hypercube over every continuous variable

    def for_sub_problem(self, q: int) -> list[DesignPoint]:
        return [p for p, s in zip(self.points, self.sub_problem_ids) if s == q]


def generate_doe(problem: ProblemDefinition, n: int | DoESpec, rng: np.random.Generator | int | None = None) -> DoE:
    """Sample ``n`` points on the global space and assign them to sub-problems.

    Continuous variables come from a single Latin hypercube over all of them;
    discrete variables are drawn uniformly. Rows are then randomly assigned
    to sub-problems and inactive coordinates dropped.
    """
    if isinstance(n, DoESpec):
        counts = list(n.counts)
        if rng is None:
            rng = n.seed
        if len(counts) != problem.n_sub_problems or min(counts) < 1:
            raise DesignSpaceError("DoE counts must be positive, one per sub-problem")
        n = sum(counts)
    else:
        counts = doe_counts(problem, n)
    rng = np.random.default_rng(rng)
    n_x = len(problem.continuous)
    unit = qmc.LatinHypercube(d=n_x, seed=rng).random(n) if n_x else np.zeros((n, 0))
    levels = {v.name: rng.integers(len(v.levels), size=n) for v in problem.discrete}
    assign = rng.permutation(np.repeat(np.arange(len(counts)), counts))
    points = []
    for i, q in enumerate(assign):
        sp = problem.sub_problems[q]
        x = {}
        for j, v in enumerate(problem.continuous):
            if v.name in sp.active_continuous:
                x[v.name] = float(v.lower + unit[i, j] * (v.upper - v.lower))
        z = {name: problem.variables[name].levels[levels[name][i]] for name in sp.active_discrete}
        points.append(DesignPoint(w=sp.w_dict, x=x, z=z))
    return DoE(tuple(points), tuple(int(q) for q in assign), unit)
