"""Kernels for variable-size design spaces.

Two decompositions are provided. The sub-problem-wise (SPW) kernel adds a
within-sub-problem kernel, masked by an indicator on the combinatorial
sub-problem variable, to a between-sub-problem discrete kernel. The
dimensional-variable-wise (DVW) kernel multiplies one such block per
dimensional variable with a kernel over the always-active variables, so
points in different sub-problems still share information through common
variables.

Also here: the plain mixed-variable kernel used for fixed-size
sub-problems (one SE leaf per continuous variable, one CS or LV leaf per
discrete variable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .design_space import DesignPoint, DesignSpaceError, ProblemDefinition, SubProblem
from .encoding import SP_COLUMN, Encoder
from .kernels import CS, LV, SE, Delta, Kernel, Product, Scale, Sum

__all__ = [
    "FAMILIES",
    "VSKernel",
    "build_dvw",
    "build_mixed",
    "build_spw",
    "delta",
    "k_dvw",
    "k_spw",
]

FAMILIES = ("cs", "lv")


def delta(w: int, w2: int, q: int) -> int:
    return int(w == q and w2 == q)


def _discrete_leaf(family: str, var: str, n_levels: int) -> Kernel:
    if family == "cs":
        return CS(var, n_levels)
    if family == "lv":
        return LV(var, n_levels)
    raise DesignSpaceError(f"unknown discrete kernel family {family!r}; expected one of {FAMILIES}")


def _leaves(problem: ProblemDefinition, names: Iterable[str], family: str) -> list[Kernel]:
    out: list[Kernel] = []
    cont = {v.name for v in problem.continuous}
    for name in names:
        if name in cont:
            out.append(SE(name))
        else:
            out.append(_discrete_leaf(family, name, len(problem.variables[name].levels)))
    return out


@dataclass(frozen=True)
class VSKernel:
    """A kernel tree bound to the encoder of its problem."""

    method: str
    tree: Kernel
    encoder: Encoder

    def __call__(self, p: DesignPoint, p2: DesignPoint) -> float:
        enc = self.encoder
        return self.tree.evaluate(enc.fragment(p), enc.fragment(p2))

    def with_tree(self, tree: Kernel) -> VSKernel:
        return VSKernel(self.method, tree, self.encoder)


def build_mixed(problem: ProblemDefinition, sub_problem: SubProblem, family: str = "cs") -> VSKernel:
    """Product of one-dimensional kernels over a fixed-size sub-problem."""
    names = (*sub_problem.active_continuous, *sub_problem.active_discrete)
    tree = Product(tuple(_leaves(problem, names, family)))
    return VSKernel("mixed", tree, Encoder(problem))


def build_spw(problem: ProblemDefinition, family: str = "cs") -> VSKernel:
    sps = problem.sub_problems
    terms: list[Kernel] = []
    for sp in sps:
        within = _leaves(problem, (*sp.active_continuous, *sp.active_discrete), family)
        terms.append(Product((Delta(SP_COLUMN, sp.id), *within)))
    if len(sps) > 1:
        terms.append(Scale(_discrete_leaf(family, SP_COLUMN, len(sps))))
    else:
        # a single level: the between kernel is a constant offset
        terms.append(Scale(Product(())))
    return VSKernel("spw", Sum(tuple(terms)), Encoder(problem))


def build_dvw(problem: ProblemDefinition, family: str = "cs") -> VSKernel:
    """DVW kernel.

    A variable owned by dimensional variable ``d`` that is active at several
    levels of ``d`` gets one leaf per level, so each level block keeps its
    own hyperparameters.
    """
    rules = problem.rules
    factors: list[Kernel] = []
    for d in problem.dimensional:
        terms: list[Kernel] = []
        for idx, level in enumerate(d.levels):
            owned = [
                v.name
                for v in (*problem.continuous, *problem.discrete)
                if v.name in rules and rules[v.name].controller == d.name and level in rules[v.name].active_levels
            ]
            terms.append(Product((Delta(d.name, idx), *_leaves(problem, owned, family))))
        terms.append(Scale(_discrete_leaf(family, d.name, len(d.levels))))
        factors.append(Sum(tuple(terms)))
    shared = _leaves(problem, (*problem.shared_continuous, *problem.shared_discrete), family)
    return VSKernel("dvw", Product((*factors, *shared)), Encoder(problem))


def k_spw(spec: VSKernel, p: DesignPoint, p2: DesignPoint) -> float:
    if spec.method != "spw":
        raise DesignSpaceError("not an SPW kernel")
    return spec(p, p2)


def k_dvw(spec: VSKernel, p: DesignPoint, p2: DesignPoint) -> float:
    if spec.method != "dvw":
        raise DesignSpaceError("not a DVW kernel")
    return spec(p, p2)
