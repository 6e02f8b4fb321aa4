"""Shared test utilities."""

from __future__ import annotations

import numpy as np

from vsdsp.design_space import DesignPoint, ProblemDefinition
from vsdsp.kernels import pack, unpack


def random_point(problem: ProblemDefinition, rng: np.random.Generator, sp=None) -> DesignPoint:
    if sp is None:
        sp = problem.sub_problems[rng.integers(problem.n_sub_problems)]
    x = {}
    for name in sp.active_continuous:
        v = problem.variables[name]
        x[name] = float(rng.uniform(v.lower, v.upper))
    z = {name: int(rng.choice(problem.variables[name].levels)) for name in sp.active_discrete}
    return DesignPoint(w=sp.w_dict, x=x, z=z)


def random_points(problem, rng, n):
    return [random_point(problem, rng) for _ in range(n)]


def random_parameters(kernel, rng):
    """The same kernel with hyperparameters drawn uniformly within bounds.

    LV coordinates are drawn from [-2, 2] so the draws keep non-trivial correlations.
    """
    hv = pack(kernel.tree)
    lo = np.where([n.startswith("lv[") for n in hv.names], -2.0, hv.lower)
    hi = np.where([n.startswith("lv[") for n in hv.names], 2.0, hv.upper)
    return kernel.with_tree(unpack(kernel.tree, rng.uniform(lo, hi)))


def min_eig_ok(K: np.ndarray) -> bool:
    n = len(K)
    return bool(np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K) / n)
