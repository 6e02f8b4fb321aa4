"""Map design points onto the numeric columns consumed by kernels."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .design_space import ContinuousVar, DesignPoint, ProblemDefinition, validate_point
from .kernels import Columns

__all__ = ["SP_COLUMN", "Encoder"]

# column holding the sub-problem id (the combinatorial dimensional variable)
SP_COLUMN = "__sp__"


class Encoder:
    """Encodes points of one problem.

    Continuous values are mapped affinely to [0, 1] using declared bounds,
    discrete and dimensional values to level indices. Inactive variables
    are imputed with 0; kernels built for variable-size spaces never read
    them because an enclosing indicator masks the entry.
    """

    def __init__(self, problem: ProblemDefinition):
        self.problem = problem
        self._cont = {v.name: v for v in problem.continuous}
        self._levels = {v.name: v for v in (*problem.discrete, *problem.dimensional)}

    def fragment(self, point: DesignPoint, validate: bool = True) -> dict[str, float]:
        """Encoded values of the variables present in ``point`` plus the sub-problem id."""
        sp = validate_point(self.problem, point) if validate else self.problem.sub_problem_for(point.w).id
        out: dict[str, float] = {SP_COLUMN: sp}
        for name, value in point.x.items():
            v = self._cont[name]
            out[name] = (value - v.lower) / (v.upper - v.lower)
        for name, value in (*point.z.items(), *point.w.items()):
            out[name] = self._levels[name].index(value)
        return out

    def columns(self, points: Sequence[DesignPoint], validate: bool = True) -> Columns:
        n = len(points)
        data: dict[str, np.ndarray] = {}
        for v in self.problem.continuous:
            data[v.name] = np.zeros(n)
        for v in self._levels.values():
            data[v.name] = np.zeros(n, dtype=np.intp)
        data[SP_COLUMN] = np.zeros(n, dtype=np.intp)
        for i, p in enumerate(points):
            for name, value in self.fragment(p, validate).items():
                data[name][i] = value
        return Columns(data, n=n)

    def sub_problem_columns(self, sp_id: int, U: np.ndarray, Z: np.ndarray) -> Columns:
        """Columns for a batch of sub-problem points given in encoded form.

        ``U`` holds normalized continuous values (n, n_x) and ``Z`` level
        indices (n, n_z), ordered like the sub-problem's active variables.
        """
        sp = self.problem.sub_problems[sp_id]
        n = len(U)
        data: dict[str, np.ndarray] = {}
        for v in self.problem.continuous:
            data[v.name] = np.zeros(n)
        for name in self._levels:
            data[name] = np.zeros(n, dtype=np.intp)
        for j, name in enumerate(sp.active_continuous):
            data[name] = np.asarray(U[:, j], dtype=float)
        for j, name in enumerate(sp.active_discrete):
            data[name] = np.asarray(Z[:, j], dtype=np.intp)
        for name, level in sp.w:
            data[name] = np.full(n, self._levels[name].index(level), dtype=np.intp)
        data[SP_COLUMN] = np.full(n, sp_id, dtype=np.intp)
        return Columns(data, n=n)

    def decode(self, sp_id: int, u: np.ndarray, z: np.ndarray) -> DesignPoint:
        """Inverse of :meth:`sub_problem_columns` for one row."""
        sp = self.problem.sub_problems[sp_id]
        x = {}
        for name, value in zip(sp.active_continuous, u):
            v: ContinuousVar = self._cont[name]
            x[name] = float(min(max(v.lower + float(value) * (v.upper - v.lower), v.lower), v.upper))
        zz = {name: self._levels[name].levels[int(i)] for name, i in zip(sp.active_discrete, z)}
        return DesignPoint(w=sp.w_dict, x=x, z=zz)
