"""Variable-size Rosenbrock benchmark (8 continuous, 3 discrete, 2 dimensional)."""

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

__all__ = ["rosenbrock_batch", "rosenbrock_eval", "rosenbrock_f", "rosenbrock_g1", "rosenbrock_g2", "rosenbrock_problem"]

# (a1, a2) keyed by (w1, w2)
A_VALUES = {(0, 0): (7.0, 9.0), (0, 1): (7.0, 6.0), (1, 0): (10.0, 9.0), (1, 1): (10.0, 6.0)}


def rosenbrock_f(xs: np.ndarray, z1, z2, z3, a1: float, a2: float) -> np.ndarray:
    """Objective over a chain ``xs`` (..., n) of active continuous values.

    ``z3`` is None when inactive. Values outside the declared bounds are
    accepted; the formula is total.
    """
    xs = np.asarray(xs, dtype=float)
    lo, hi = xs[..., :-1], xs[..., 1:]
    z2 = np.asarray(z2)
    A = np.where(z2 == 0, a1 * a2, 0.7 * a1 * a2)
    B = np.where(z2 == 0, (a1 + a2) / 10.0, (a1 - a2) / 10.0)
    chain = np.sum(A[..., None] * (hi - lo) ** 2 + B[..., None] * (1.0 - lo) ** 2, axis=-1)
    f = 100.0 * np.asarray(z1) + chain
    if z3 is not None:
        f = f - 35.0 * np.asarray(z3)
    return f


def rosenbrock_g1(xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    lo, hi = xs[..., :-1], xs[..., 1:]
    return np.sum(-((lo - 1.0) ** 3) + hi - 2.6, axis=-1)


def rosenbrock_g2(xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    lo, hi = xs[..., :-1], xs[..., 1:]
    return np.sum(-lo - hi + 0.4, axis=-1)


def _chain(x, w1, w2) -> list[str]:
    names = ["x1", "x2"]
    names += ["x3", "x4"] if w2 == 0 else ["x5", "x6"]
    if w1 == 1:
        names += ["x7", "x8"]
    return names


def rosenbrock_eval(point: DesignPoint) -> tuple[float, dict[str, float]]:
    x, z, w = point.x, point.z, point.w
    w1, w2 = w["w1"], w["w2"]
    xs = np.array([x[n] for n in _chain(x, w1, w2)])
    a1, a2 = A_VALUES[(w1, w2)]
    f = rosenbrock_f(xs, z["z1"], z["z2"], z.get("z3"), a1, a2)
    g = {"g1": float(rosenbrock_g1(xs))}
    if w1 == 0:
        g["g2"] = float(rosenbrock_g2(xs))
    return float(f), g


def rosenbrock_batch(sp, X: np.ndarray, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluation of many points of one sub-problem."""
    w = sp.w_dict
    order = [sp.active_continuous.index(n) for n in _chain(None, w["w1"], w["w2"])]
    xs = np.asarray(X, dtype=float)[:, order]
    z = {name: Z[:, j] for j, name in enumerate(sp.active_discrete)}
    a1, a2 = A_VALUES[(w["w1"], w["w2"])]
    f = rosenbrock_f(xs, z["z1"], z["z2"], z.get("z3"), a1, a2)
    G = [rosenbrock_g1(xs)]
    if w["w1"] == 0:
        G.append(rosenbrock_g2(xs))
    return f, np.stack(G, axis=1)


def rosenbrock_problem() -> ProblemDefinition:
    odd, even = (-1.0, 0.5), (0.0, 1.5)
    return ProblemDefinition(
        name="rosenbrock",
        continuous=tuple(ContinuousVar(f"x{i}", *(odd if i % 2 else even)) for i in range(1, 9)),
        discrete=(DiscreteVar("z1", (0, 1)), DiscreteVar("z2", (0, 1)), DiscreteVar("z3", (0, 1, 2))),
        dimensional=(DimensionalVar("w1", (0, 1)), DimensionalVar("w2", (0, 1))),
        activation=(
            ActivationRule("x3", "w2", frozenset({0})),
            ActivationRule("x4", "w2", frozenset({0})),
            ActivationRule("x5", "w2", frozenset({1})),
            ActivationRule("x6", "w2", frozenset({1})),
            ActivationRule("x7", "w1", frozenset({1})),
            ActivationRule("x8", "w1", frozenset({1})),
            ActivationRule("z3", "w2", frozenset({1})),
        ),
        constraints=(ConstraintSpec("g1"), ConstraintSpec("g2", {"w1": frozenset({0})})),
        evaluator=rosenbrock_eval,
        batch_evaluator=rosenbrock_batch,
    )
