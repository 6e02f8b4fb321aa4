"""Variable-size Goldstein benchmark (5 continuous, 4 discrete, 2 dimensional)."""

from __future__ import annotations

import numpy as np

from ..design_space import (
    ActivationRule,
    ConstraintSpec,
    ContinuousVar,
    DesignPoint,
    DimensionalVar,
    DiscreteVar,
    ProblemDefinition,
)

__all__ = ["goldstein_batch", "goldstein_eval", "goldstein_f", "goldstein_g", "goldstein_problem"]

# level of z1 (resp. z2) -> substituted value of x3 (resp. x4)
SUBSTITUTE = np.array([20.0, 50.0, 80.0])
# level -> c1 and level -> c2 of the constraint tables
C1_TABLE = np.array([3.0, 2.0, 1.0])
C2_TABLE = np.array([0.5, -1.0, -2.0])


def goldstein_f(x1, x2, x3, x4, x5, z3, z4, w2):
    """Objective after substitution; arguments broadcast as arrays.

    ``x3`` and ``x4`` are either free values or the table substitutes, ``x5``
    only matters when ``w2 == 1``.
    """
    x1, x2, x3, x4, x5 = (np.asarray(a, dtype=float) for a in (x1, x2, x3, x4, x5))
    z3, z4 = np.asarray(z3), np.asarray(z4)
    f = (
        53.3108
        + 0.184901 * x1
        - 5.02914e-6 * x1**3
        + 7.72522e-8 * x1**z3
        - 0.0870775 * x2
        - 0.106959 * x3
        + 7.98772e-6 * x3**z4
        + 0.00242482 * x4
        + 1.32851e-6 * x4**3
        - 0.00146393 * x1 * x2
        - 0.00301588 * x1 * x3
        - 0.00272291 * x1 * x4
        + 0.0017004 * x2 * x3
        + 0.0038428 * x2 * x4
        - 0.000198969 * x3 * x4
        + 1.86025e-5 * x1 * x2 * x3
        - 1.88719e-6 * x1 * x2 * x4
        + 2.50923e-5 * x1 * x3 * x4
        - 5.62199e-5 * x2 * x3 * x4
    )
    return f + np.where(np.asarray(w2) == 1, 5.0 * np.cos(2.0 * np.pi * x5 / 100.0) - 2.0, 0.0)


def goldstein_g(x1, x2, c1, c2):
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    return -((x1 - 50.0) ** 2) - (x2 - 50.0) ** 2 + (20.0 + np.asarray(c1) * np.asarray(c2)) ** 2


def _resolve(w1, z1, z2, z3, z4, x3, x4):
    """Effective (x3, x4, c1, c2) for one dimensional assignment ``w1``."""
    if w1 in (0, 2):
        x3 = SUBSTITUTE[z1]
    if w1 in (0, 1):
        x4 = SUBSTITUTE[z2]
    if w1 == 0:
        c1, c2 = C1_TABLE[z1], C2_TABLE[z2]
    elif w1 == 1:
        c1, c2 = 0.5, C2_TABLE[z2]
    elif w1 == 2:
        c1, c2 = C1_TABLE[z1], 0.7
    else:
        c1, c2 = C1_TABLE[z3], C2_TABLE[z4]
    return x3, x4, c1, c2


def goldstein_eval(point: DesignPoint) -> tuple[float, dict[str, float]]:
    x, z, w = point.x, point.z, point.w
    w1, w2 = w["w1"], w["w2"]
    x3, x4, c1, c2 = _resolve(w1, z.get("z1", 0), z.get("z2", 0), z["z3"], z["z4"], x.get("x3"), x.get("x4"))
    f = goldstein_f(x["x1"], x["x2"], x3, x4, x.get("x5", 0.0), z["z3"], z["z4"], w2)
    g = goldstein_g(x["x1"], x["x2"], c1, c2)
    return float(f), {"g": float(g)}


def goldstein_batch(sp, X: np.ndarray, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluation of many points of one sub-problem."""
    n = len(X)
    cols = {name: X[:, j] for j, name in enumerate(sp.active_continuous)}
    cols.update({name: np.asarray(Z[:, j], dtype=np.intp) for j, name in enumerate(sp.active_discrete)})
    w = sp.w_dict
    w1, w2 = w["w1"], w["w2"]
    zero = np.zeros(n, dtype=np.intp)
    z1, z2 = cols.get("z1", zero), cols.get("z2", zero)
    z3, z4 = cols["z3"], cols["z4"]
    x3 = SUBSTITUTE[z1] if w1 in (0, 2) else cols["x3"]
    x4 = SUBSTITUTE[z2] if w1 in (0, 1) else cols["x4"]
    if w1 == 0:
        c1, c2 = C1_TABLE[z1], C2_TABLE[z2]
    elif w1 == 1:
        c1, c2 = 0.5, C2_TABLE[z2]
    elif w1 == 2:
        c1, c2 = C1_TABLE[z1], 0.7
    else:
        c1, c2 = C1_TABLE[z3], C2_TABLE[z4]
    x5 = cols.get("x5", np.zeros(n))
    f = goldstein_f(cols["x1"], cols["x2"], x3, x4, x5, z3, z4, w2)
    g = goldstein_g(cols["x1"], cols["x2"], c1, c2)
    return f, g[:, None]


def goldstein_problem() -> ProblemDefinition:
    # w2 is declared first so lexicographic enumeration gives the usual
    # numbering: w2=0 with w1=0..3, then w2=1 with w1=0..3
    return ProblemDefinition(
        name="goldstein",
        continuous=tuple(ContinuousVar(f"x{i}", 0.0, 100.0) for i in range(1, 6)),
        discrete=tuple(DiscreteVar(f"z{i}", (0, 1, 2)) for i in range(1, 5)),
        dimensional=(DimensionalVar("w2", (0, 1)), DimensionalVar("w1", (0, 1, 2, 3))),
        activation=(
            ActivationRule("x3", "w1", frozenset({1, 3})),
            ActivationRule("x4", "w1", frozenset({2, 3})),
            ActivationRule("x5", "w2", frozenset({1})),
            ActivationRule("z1", "w1", frozenset({0, 2})),
            ActivationRule("z2", "w1", frozenset({0, 1})),
        ),
        constraints=(ConstraintSpec("g"),),
        evaluator=goldstein_eval,
        batch_evaluator=goldstein_batch,
    )
