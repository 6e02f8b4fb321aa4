from __future__ import annotations

import pytest

from vsdsp.design_space import (
    ActivationRule,
    ConstraintSpec,
    ContinuousVar,
    DesignPoint,
    DesignSpaceError,
    DimensionalVar,
    DiscreteVar,
    InvalidPointError,
    ProblemDefinition,
    count_categories,
    count_global_categories,
    enumerate_sub_problems,
    make_point,
    validate_point,
)
from vsdsp.problem_file import parse_problem


def _toy(exclusions=()):
    return ProblemDefinition(
        name="toy",
        continuous=(ContinuousVar("x1", 0, 1), ContinuousVar("x2", 0, 1)),
        discrete=(DiscreteVar("z1", (0, 1, 2)),),
        dimensional=(DimensionalVar("w", (0, 1)),),
        activation=(ActivationRule("x2", "w", frozenset({1})),),
        exclusions=exclusions,
        evaluator=lambda p: (p.x["x1"], {}),
    )


def test_goldstein_sub_problems(goldstein):
    sps = enumerate_sub_problems(goldstein)
    dims = [(len(s.active_continuous), len(s.active_discrete)) for s in sps]
    assert dims == [(2, 4), (3, 3), (3, 3), (4, 2), (3, 4), (4, 3), (4, 3), (5, 2)]
    assert sum(s.dim for s in sps) == 52
    assert [s.id for s in sps] == list(range(8))
    assert sps[7].w_dict == {"w2": 1, "w1": 3}


def test_rosenbrock_sub_problems(rosenbrock):
    sps = enumerate_sub_problems(rosenbrock)
    assert [s.dim for s in sps] == [6, 7, 8, 9]
    assert [len(s.active_continuous) for s in sps] == [4, 4, 6, 6]
    assert [s.active_constraints for s in sps] == [("g1", "g2"), ("g1", "g2"), ("g1",), ("g1",)]


def test_two_levels_two_sub_problems():
    assert len(enumerate_sub_problems(_toy())) == 2


def test_enumeration_is_deterministic(goldstein):
    assert enumerate_sub_problems(goldstein) == enumerate_sub_problems(goldstein)


def test_exclusions_drop_combinations():
    p = _toy(exclusions=({"w": 1},))
    assert [s.w_dict for s in p.sub_problems] == [{"w": 0}]


def test_empty_sub_problem_rejected():
    with pytest.raises(DesignSpaceError):
        ProblemDefinition(
            name="empty",
            continuous=(ContinuousVar("x", 0, 1),),
            dimensional=(DimensionalVar("w", (0, 1)),),
            activation=(ActivationRule("x", "w", frozenset({1})),),
        ).sub_problems


def test_count_categories_illustrative():
    p = ProblemDefinition(
        name="m",
        continuous=(ContinuousVar("x", 0, 1),),
        discrete=(DiscreteVar("a", (0, 1, 2)), DiscreteVar("b", (0, 1)), DiscreteVar("c", (0, 1, 2, 3))),
        dimensional=(DimensionalVar("w", (0, 1)),),
        activation=(ActivationRule("x", "w", frozenset({1})),),
    )
    assert [count_categories(p, sp) for sp in p.sub_problems] == [24, 24]


def test_count_categories_no_discrete():
    p = ProblemDefinition(name="c", continuous=(ContinuousVar("x", 0, 1),), dimensional=(DimensionalVar("w", (0, 1)),))
    assert count_categories(p, p.sub_problems[0]) == 1


def test_global_categories_rosenbrock(rosenbrock):
    assert count_global_categories(rosenbrock) == 32


def test_inactive_value_rejected(goldstein):
    p = DesignPoint(w={"w1": 0, "w2": 0}, x={"x1": 1, "x2": 2, "x3": 3}, z={"z1": 0, "z2": 0, "z3": 0, "z4": 0})
    with pytest.raises(InvalidPointError, match="value supplied for inactive variable"):
        validate_point(goldstein, p)


def test_goldstein_last_sub_problem(goldstein):
    p = DesignPoint(
        w={"w1": 3, "w2": 1},
        x={f"x{i}": 10.0 * i for i in range(1, 6)},
        z={"z3": 1, "z4": 2},
    )
    assert validate_point(goldstein, p) == 7


def test_rosenbrock_constraint_set(rosenbrock):
    sp = rosenbrock.sub_problem_for({"w1": 1, "w2": 0})
    assert sp.active_constraints == ("g1",)


@pytest.mark.parametrize(
    "point, msg",
    [
        (DesignPoint(w={"w": 0}, x={"x1": 2.0}, z={"z1": 0}), "outside"),
        (DesignPoint(w={"w": 0}, x={"x1": 0.5}, z={"z1": 7}), "level"),
        (DesignPoint(w={"w": 0}, x={}, z={"z1": 0}), "missing"),
        (DesignPoint(w={"w": 5}, x={"x1": 0.5}, z={"z1": 0}), "w"),
    ],
)
def test_invalid_points(point, msg):
    with pytest.raises(InvalidPointError, match=msg):
        validate_point(_toy(), point)


def test_excluded_combination_rejected():
    p = _toy(exclusions=({"w": 1},))
    with pytest.raises(InvalidPointError):
        validate_point(p, DesignPoint(w={"w": 1}, x={"x1": 0.5, "x2": 0.5}, z={"z1": 0}))


def test_activation_is_function_of_w(goldstein):
    for sp in goldstein.sub_problems:
        assert goldstein.sub_problem_for(sp.w_dict) is sp


def test_make_point_roundtrip(goldstein):
    sp = goldstein.sub_problems[3]
    p = make_point(sp, [1, 2, 3, 4], [0, 1])
    assert validate_point(goldstein, p) == 3


def test_constraint_activity():
    c = ConstraintSpec("g", {"w": frozenset({0})})
    assert c.is_active({"w": 0}) and not c.is_active({"w": 1})


def test_invalid_declarations():
    with pytest.raises(DesignSpaceError):
        ProblemDefinition(name="bad", continuous=(ContinuousVar("x", 0, 1), ContinuousVar("x", 0, 1)))
    with pytest.raises(DesignSpaceError):
        DiscreteVar("z", (0,))
    with pytest.raises(DesignSpaceError):
        ContinuousVar("x", 1, 1)


def test_problem_file_roundtrip(goldstein):
    text = """
    name        gold
    continuous  x1 0 100
    continuous  x2 0 100
    continuous  x3 0 100
    continuous  x4 0 100
    continuous  x5 0 100
    discrete    z1 0 1 2
    discrete    z2 0 1 2
    discrete    z3 0 1 2
    discrete    z4 0 1 2
    dimensional w2 0 1
    dimensional w1 0 1 2 3
    activate    x3 w1 1 3
    activate    x4 w1 2 3
    activate    x5 w2 1
    activate    z1 w1 0 2
    activate    z2 w1 0 1
    constraint  g
    evaluator   vsdsp.benchmarks.goldstein:goldstein_eval
    batch       vsdsp.benchmarks.goldstein:goldstein_batch
    """
    p = parse_problem(text)
    assert p.name == "gold"
    assert [s.dim for s in p.sub_problems] == [s.dim for s in goldstein.sub_problems]
    point = make_point(p.sub_problems[7], [50, 50, 50, 50, 50], [0, 0])
    assert p.evaluate(point) == goldstein.evaluate(point)


def test_problem_file_errors():
    with pytest.raises(DesignSpaceError, match="cannot parse"):
        parse_problem("bogus line")
    with pytest.raises(DesignSpaceError, match="cannot import"):
        parse_problem("continuous x 0 1\nevaluator nowhere.module:f")
    with pytest.raises(DesignSpaceError):
        parse_problem("constraint g w1")
