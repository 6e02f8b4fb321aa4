"""Analytical benchmark problems, initial designs and a reference-optimum oracle."""

from __future__ import annotations

from .doe import DoE, DoESpec, doe_counts, generate_doe
from .goldstein import goldstein_eval, goldstein_problem
from .oracle import ReferenceResult, global_reference, reference_optimum
from .rosenbrock import rosenbrock_eval, rosenbrock_problem

PROBLEMS = {"goldstein": goldstein_problem, "rosenbrock": rosenbrock_problem}

__all__ = [
    "DoE",
    "DoESpec",
    "PROBLEMS",
    "ReferenceResult",
    "doe_counts",
    "generate_doe",
    "global_reference",
    "goldstein_eval",
    "goldstein_problem",
    "reference_optimum",
    "rosenbrock_eval",
    "rosenbrock_problem",
]
