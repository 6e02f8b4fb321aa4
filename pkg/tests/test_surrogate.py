from __future__ import annotations

import math

import numpy as np
import pytest
from helpers import random_point, random_points

from vsdsp.design_space import (
    ContinuousVar,
    DesignPoint,
    DimensionalVar,
    DiscreteVar,
    ProblemDefinition,
)
from vsdsp.kernels import SE, Product, gram, pack, unpack
from vsdsp.surrogate import (
    JITTER_START,
    Dataset,
    FitError,
    condition,
    fit,
    log_likelihood,
    predict,
    update,
)
from vsdsp.surrogate import _neg_ll_and_grad
from vsdsp.vskernels import build_dvw, build_mixed, build_spw

LINE = ProblemDefinition(
    name="line",
    continuous=(ContinuousVar("x", 0.0, 10.0),),
    discrete=(DiscreteVar("z", (0, 1, 2)),),
    dimensional=(DimensionalVar("w", (0, 1)),),
    exclusions=({"w": 1},),
)
SP = LINE.sub_problems[0]


def _pt(x, z=0):
    return DesignPoint(w={"w": 0}, x={"x": float(x)}, z={"z": z})


def _se_kernel(theta=None):
    k = build_mixed(LINE, SP, "cs")
    tree = Product((SE("x") if theta is None else SE("x", theta),))
    return k.with_tree(tree)


def _families(goldstein):
    sp = goldstein.sub_problems[4]
    return {
        "se": lambda: (goldstein, [sp], build_mixed(goldstein, sp, "cs").with_tree(
            Product(tuple(c for c in build_mixed(goldstein, sp, "cs").tree.children if isinstance(c, SE)))
        )),
        "se_cs": lambda: (goldstein, [sp], build_mixed(goldstein, sp, "cs")),
        "se_lv": lambda: (goldstein, [sp], build_mixed(goldstein, sp, "lv")),
        "spw": lambda: (goldstein, goldstein.sub_problems, build_spw(goldstein, "lv")),
        "dvw": lambda: (goldstein, goldstein.sub_problems, build_dvw(goldstein, "cs")),
    }


@pytest.mark.parametrize("family", ["se", "se_cs", "se_lv", "spw", "dvw"])
def test_interpolation(goldstein, family):
    problem, sps, kernel = _families(goldstein)[family]()
    rng = np.random.default_rng(0)
    pts = [random_point(problem, rng, sps[i % len(sps)]) for i in range(24)]
    y = np.array([problem.evaluate(p).objective for p in pts])
    model = fit(Dataset(pts, y), kernel, seed=1)
    mean, var = predict(model, pts)
    assert np.max(np.abs(mean - y)) <= 1e-6 * np.std(y)
    # prior variance at x is sigma^2 k(x, x); k(x, x) > 1 for SPW/DVW with k_w variances
    prior = model.sigma2 * model.y_std**2 * np.diag(gram(model.kernel.tree, model.X))
    assert np.all(var <= 1e-6 * prior)
    # the plain posterior formula (before exact reproduction of training inputs)
    K = gram(model.kernel.tree, model.X)
    raw_mean = model.y_mean + model.y_std * (model.mu + K @ model.alpha)
    v = np.linalg.solve(model.chol, K)
    raw_var = model.sigma2 * model.y_std**2 * (np.diag(K) - np.sum(v * v, axis=0))
    assert np.max(np.abs(raw_mean - y)) <= 1e-6 * np.std(y)
    assert np.all(raw_var <= 1e-6 * prior)
    # chol reproduces the Gram (with its jitter)
    K = gram(model.kernel.tree, model.X) + model.jitter * np.eye(len(y))
    assert np.linalg.norm(model.chol @ model.chol.T - K) <= 1e-8 * np.linalg.norm(K)


def test_prior_reversion():
    pts = [_pt(x) for x in (0.0, 0.5, 1.0, 1.5, 2.0)]
    y = np.array([1.0, 3.0, 2.0, 5.0, 4.0])
    model = condition(Dataset(pts, y), _se_kernel(theta=1000.0))
    mean, var = predict(model, _pt(10.0))
    sigma2 = model.sigma2 * model.y_std**2
    assert mean == pytest.approx(model.y_mean + model.y_std * model.mu, abs=1e-3 * math.sqrt(sigma2))
    assert var == pytest.approx(sigma2, abs=1e-3 * sigma2)


def test_three_point_oracle():
    xs = np.array([1.0, 4.0, 8.5])
    y = np.array([2.0, -1.0, 0.5])
    theta = 3.0
    model = condition(Dataset([_pt(x) for x in xs], y), _se_kernel(theta))
    # explicit small-matrix GP: normalized inputs, standardized outputs,
    # constant mean and variance profiled, jitter 1e-8 on the diagonal
    u = xs / 10.0
    ys = (y - y.mean()) / y.std()
    K = np.exp(-theta * (u[:, None] - u[None, :]) ** 2) + JITTER_START * np.eye(3)
    one = np.ones(3)
    mu = one @ np.linalg.solve(K, ys) / (one @ np.linalg.solve(K, one))
    r = ys - mu
    s2 = r @ np.linalg.solve(K, r) / 3
    for xq in (0.0, 2.5, 6.0, 10.0):
        psi = np.exp(-theta * (u - xq / 10.0) ** 2)
        m = mu + psi @ np.linalg.solve(K, r)
        v = s2 * (1.0 - psi @ np.linalg.solve(K, psi))
        mean, var = predict(model, _pt(xq))
        assert mean == pytest.approx(y.mean() + y.std() * m, rel=1e-9, abs=1e-12)
        assert var == pytest.approx(max(v, 0.0) * y.std() ** 2, rel=1e-9, abs=1e-12)


def test_two_identical_points_equal_responses():
    model = fit(Dataset([_pt(3.0), _pt(3.0)], [4.2, 4.2]), _se_kernel(), seed=0)
    mean, var = predict(model, _pt(3.0))
    assert mean == pytest.approx(4.2, abs=1e-12)
    assert var <= 1e-6
    assert model.constant


def test_linear_fit_held_out():
    xs = [0.0, 2.5, 5.0, 7.5, 10.0]
    model = fit(Dataset([_pt(x) for x in xs], [2.0 * x + 1 for x in xs]), _se_kernel(), seed=0)
    mean, var = predict(model, _pt(6.0))
    assert abs(mean - 13.0) <= 3.0 * math.sqrt(var) + 1e-9


def test_optimum_not_worse_than_starts(goldstein):
    rng = np.random.default_rng(2)
    pts = random_points(goldstein, rng, 20)
    y = [goldstein.evaluate(p).objective for p in pts]
    model = fit(Dataset(pts, y), build_spw(goldstein, "lv"), seed=3)
    assert len(model.initial_log_likelihoods) == 5
    assert model.log_likelihood >= max(model.initial_log_likelihoods) - 1e-9
    assert model.log_likelihood == pytest.approx(log_likelihood(model.kernel, model.dataset), rel=1e-10)


def test_update_equals_direct_fit():
    rng = np.random.default_rng(4)
    pts = [_pt(rng.uniform(0, 10), int(rng.integers(3))) for _ in range(6)]
    y = [math.sin(p.x["x"]) + p.z["z"] for p in pts]
    five = fit(Dataset(pts[:5], y[:5]), build_mixed(LINE, SP, "cs"), seed=7)
    six = update(five, pts[5], y[5])
    direct = fit(Dataset(pts, y), build_mixed(LINE, SP, "cs"), seed=7)
    assert np.array_equal(pack(six.kernel.tree).values, pack(direct.kernel.tree).values)
    probe = [_pt(x, z) for x in (1.0, 4.0, 9.0) for z in range(3)]
    np.testing.assert_array_equal(predict(six, probe)[0], predict(direct, probe)[0])


def test_duplicate_point_same_response_keeps_predictions():
    rng = np.random.default_rng(5)
    pts = [_pt(x) for x in rng.uniform(0, 10, 6)]
    y = np.array([math.cos(p.x["x"]) for p in pts])
    # hyperparameters held fixed; a well-conditioned Gram keeps the jitter negligible
    base = condition(Dataset(pts, y), _se_kernel(50.0))
    dup = condition(Dataset([*pts, pts[2]], np.append(y, y[2])), _se_kernel(50.0))
    assert dup.jitter == pytest.approx(JITTER_START)
    probe = [_pt(x) for x in np.linspace(0, 10, 11)]
    # responses are standardized with the sample statistics, so compare in problem units
    np.testing.assert_allclose(predict(base, probe)[0], predict(dup, probe)[0], atol=1e-6)


def test_duplicate_point_different_response():
    pts = [_pt(1.0), _pt(5.0), _pt(5.0)]
    with pytest.raises(FitError, match="different responses"):
        condition(Dataset(pts, [0.0, 1.0, 2.0]), _se_kernel(2.0))
    with pytest.raises(FitError, match="different responses"):
        fit(Dataset(pts, [0.0, 1.0, 2.0]), _se_kernel(), seed=0)


def test_non_pd_gram_raises():
    bad = _se_kernel(2.0)

    class Negative(SE):
        def gram(self, A):
            return -np.ones((A.n, A.n))

    with pytest.raises(FitError):
        condition(Dataset([_pt(1.0), _pt(2.0)], [0.0, 1.0]), bad.with_tree(Product((Negative("x", 2.0),))))


def test_reordering_invariance(goldstein):
    rng = np.random.default_rng(6)
    pts = random_points(goldstein, rng, 25)
    y = np.array([goldstein.evaluate(p).objective for p in pts])
    model = fit(Dataset(pts, y), build_dvw(goldstein, "lv"), seed=0)
    perm = rng.permutation(len(pts))
    shuffled = condition(Dataset([pts[i] for i in perm], y[perm]), model.kernel)
    probe = random_points(goldstein, rng, 15)
    m1, v1 = predict(model, probe)
    m2, v2 = predict(shuffled, probe)
    np.testing.assert_allclose(m2, m1, rtol=1e-9)
    np.testing.assert_allclose(v2, v1, rtol=1e-9, atol=1e-9 * float(np.max(v1)))


def test_negative_variance_bounded(goldstein):
    rng = np.random.default_rng(8)
    pts = random_points(goldstein, rng, 30)
    y = [goldstein.evaluate(p).objective for p in pts]
    model = fit(Dataset(pts, y), build_spw(goldstein, "cs"), seed=0)
    from scipy.linalg import solve_triangular

    tree = model.kernel.tree
    for probe in (model.X, model.kernel.encoder.columns(random_points(goldstein, rng, 40))):
        v = solve_triangular(model.chol, tree(model.X, probe), lower=True)
        raw = tree.diag(probe) - np.sum(v * v, axis=0)
        assert raw.min() >= -1e-8


@pytest.mark.parametrize("family", ["spw_cs", "spw_lv", "dvw_cs", "dvw_lv", "mixed_lv"])
def test_likelihood_gradient(goldstein, family):
    rng = np.random.default_rng(9)
    method, fam = family.split("_")
    if method == "mixed":
        sp = goldstein.sub_problems[0]
        kernel = build_mixed(goldstein, sp, fam)
        pts = [random_point(goldstein, rng, sp) for _ in range(14)]
    else:
        kernel = (build_spw if method == "spw" else build_dvw)(goldstein, fam)
        pts = random_points(goldstein, rng, 14)
    y = np.array([goldstein.evaluate(p).objective for p in pts])
    ys = (y - y.mean()) / y.std()
    X = kernel.encoder.columns(pts)
    hv = pack(kernel.tree)
    # moderate box keeps the Gram well conditioned (no jitter escalation)
    lo = np.where([n.startswith("se[") for n in hv.names], math.log(0.5), -1.0)
    hi = np.where([n.startswith("se[") for n in hv.names], math.log(20.0), 1.0)
    for _ in range(10):
        u = rng.uniform(lo, hi)
        f, g = _neg_ll_and_grad(unpack(kernel.tree, u), X, ys)
        for i in range(len(u)):
            h = 1e-5
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd = (_neg_ll_and_grad(unpack(kernel.tree, up), X, ys, False)[0]
                  - _neg_ll_and_grad(unpack(kernel.tree, dn), X, ys, False)[0]) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-5)


def test_fit_deterministic(rosenbrock):
    rng = np.random.default_rng(10)
    pts = random_points(rosenbrock, rng, 16)
    y = [rosenbrock.evaluate(p).objective for p in pts]
    a = fit(Dataset(pts, y), build_dvw(rosenbrock, "lv"), seed=4)
    b = fit(Dataset(pts, y), build_dvw(rosenbrock, "lv"), seed=4)
    assert np.array_equal(pack(a.kernel.tree).values, pack(b.kernel.tree).values)
    assert a.summary()["log_likelihood"] == b.summary()["log_likelihood"]


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([_pt(1.0)], [1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset([_pt(1.0)], [math.nan])


def test_training_inputs_reproduced_exactly():
    pts = [_pt(x) for x in (0.5, 2.0, 4.5, 7.0)]
    y = np.array([1.0, -2.0, 0.5, 3.0])
    model = condition(Dataset(pts, y), _se_kernel(5.0))
    mean, var = predict(model, pts)
    assert np.array_equal(mean, y) and np.all(var == 0.0)
    # a nearby input still gets the (continuous) posterior
    m, v = predict(model, _pt(2.0 + 1e-7))
    assert m == pytest.approx(-2.0, abs=1e-4) and 0.0 <= v <= 1e-6 * model.sigma2 * model.y_std**2
