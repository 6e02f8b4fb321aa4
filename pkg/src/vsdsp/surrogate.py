"""Gaussian-process regression with a constant mean over encoded design points.

The kernel tree carries unit variance; the process variance and the
constant mean are profiled out of the likelihood, so the optimizer only
sees the tree's own hyperparameters. Responses are standardized before
fitting and predictions are returned in problem units.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.linalg.lapack import dpotri as potri
from scipy.optimize import minimize

from .design_space import DesignPoint
from .kernels import Columns, Kernel, pack, unpack
from .vskernels import VSKernel

__all__ = [
    "Dataset",
    "FitError",
    "TrainedSurrogate",
    "condition",
    "fit",
    "log_likelihood",
    "predict",
    "predict_columns",
    "update",
]

log = logging.getLogger(__name__)

JITTER_START = 1e-8
JITTER_MAX = 1e-2
VARIANCE_FLOOR = 1e-6
N_RESTARTS = 5
# random restarts draw latent coordinates from this box; the full [-10, 10]
# range mostly yields fully decorrelated levels with vanishing gradients
LV_START_BOX = 1.5


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    points: tuple[DesignPoint, ...]
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        if len(y) != len(self.points):
            raise ValueError("points and responses differ in length")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")

    def __len__(self) -> int:
        return len(self.y)

    def append(self, point: DesignPoint, y: float) -> Dataset:
        return Dataset((*self.points, point), np.append(self.y, y))


@dataclass(frozen=True, eq=False)
class TrainedSurrogate:
    kernel: VSKernel
    mu: float  # constant mean, standardized units
    sigma2: float  # process variance, standardized units
    chol: np.ndarray  # lower factor of K0 + jitter I (unit-variance Gram)
    alpha: np.ndarray  # (K0 + jitter I)^-1 (y - mu)
    y_mean: float
    y_std: float
    X: Columns
    dataset: Dataset
    jitter: float
    log_likelihood: float
    template: VSKernel = None
    initial_log_likelihoods: tuple[float, ...] = ()
    constant: bool = False
    seed: object = None

    @property
    def n(self) -> int:
        return len(self.dataset)

    @cached_property
    def training_index(self) -> dict[bytes, int]:
        """Encoded training rows (as bytes) to their dataset index."""
        if not self.X.data:
            return {}
        return {k.tobytes(): i for i, k in enumerate(_row_keys(self.X))}

    def summary(self) -> dict:
        hv = pack(self.kernel.tree)
        return {
            "log_likelihood": self.log_likelihood,
            "mu": self.y_mean + self.y_std * self.mu,
            "sigma2": self.sigma2 * self.y_std**2,
            "jitter": self.jitter,
            "hyperparameters": dict(zip(hv.names, hv.values.tolist())),
        }


# -- likelihood -------------------------------------------------------------


def _factor(K: np.ndarray) -> tuple[np.ndarray, float]:
    scale = float(np.mean(np.diag(K)))
    if not np.isfinite(scale) or scale <= 0.0:
        raise FitError("Gram matrix has a non-positive or non-finite diagonal")
    jitter = JITTER_START * scale
    ceiling = JITTER_MAX * max(1.0, scale)
    n = len(K)
    while True:
        try:
            L = cholesky(K + jitter * np.eye(n), lower=True, check_finite=False)
            return L, jitter
        except LinAlgError:
            jitter *= 10.0
            if jitter > ceiling:
                raise FitError("Gram matrix not positive definite after maximal jitter") from None


def _check_conflicts(X: Columns, y: np.ndarray) -> None:
    """Reject identical inputs with different responses (a noise-free GP cannot interpolate them)."""
    if not X.data or X.n < 2:
        return
    rows = np.column_stack([np.asarray(v, dtype=float) for v in X.data.values()])
    _, inverse = np.unique(rows, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    lo = np.full(inverse.max() + 1, np.inf)
    hi = np.full(inverse.max() + 1, -np.inf)
    np.minimum.at(lo, inverse, y)
    np.maximum.at(hi, inverse, y)
    if np.any(hi - lo > 1e-9):
        raise FitError("identical inputs with different responses (singular noise-free Gram)")


def _profile(L: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float]:
    ones = np.ones(len(y))
    ki_y, ki_1 = cho_solve((L, True), np.column_stack([y, ones]), check_finite=False).T
    mu = float(ones @ ki_y / (ones @ ki_1))
    alpha = ki_y - mu * ki_1
    sigma2 = float((y - mu) @ alpha) / len(y)
    return mu, alpha, max(sigma2, VARIANCE_FLOOR * 1e-6)


def _neg_ll_and_grad(tree: Kernel, X: Columns, y: np.ndarray, want_grad: bool = True):
    K, backward = tree.forward(X)
    L, _ = _factor(K)
    mu, alpha, sigma2 = _profile(L, y)
    n = len(y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    ll = -0.5 * n * math.log(sigma2) - 0.5 * logdet - 0.5 * n * (1.0 + math.log(2.0 * math.pi))
    if not want_grad:
        return -ll, None
    Kinv, info = potri(L, lower=1)
    if info != 0:
        raise FitError("Gram inverse failed")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    G = 0.5 * (np.outer(alpha, alpha) / sigma2 - Kinv)
    grad = np.asarray(backward(G), dtype=float)
    return -ll, -grad


def log_likelihood(kernel: VSKernel, dataset: Dataset, values=None) -> float:
    """Concentrated log marginal likelihood on standardized responses."""
    tree = kernel.tree if values is None else unpack(kernel.tree, values)
    y, _, _ = _standardize(dataset.y)
    return -_neg_ll_and_grad(tree, kernel.encoder.columns(dataset.points), y, want_grad=False)[0]


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    m = float(np.mean(y))
    s = float(np.std(y))
    if s <= 1e-12 * max(1.0, abs(m)):
        s = 1.0
    return (y - m) / s, m, s


# -- fitting ----------------------------------------------------------------


def _starts(tree: Kernel, rng: np.random.Generator, n_restarts: int) -> list[np.ndarray]:
    hv = pack(tree)
    lv_mask = np.array([name.startswith("lv[") for name in hv.names], dtype=bool)
    first = hv.midpoint()
    # the midpoint of the latent box puts every level on the origin, a
    # stationary point; use the tree's own (spread) layout instead
    first[lv_mask] = hv.values[lv_mask]
    starts = [first]
    for _ in range(n_restarts - 1):
        u = rng.uniform(hv.lower, hv.upper)
        u[lv_mask] = rng.uniform(-LV_START_BOX, LV_START_BOX, size=int(lv_mask.sum()))
        starts.append(u)
    return starts


def condition(dataset: Dataset, kernel: VSKernel, **extra) -> TrainedSurrogate:
    """Build the posterior for fixed hyperparameters (no optimization)."""
    X = kernel.encoder.columns(dataset.points)
    y, m, s = _standardize(dataset.y)
    _check_conflicts(X, y)
    return _posterior(kernel, X, y, m, s, dataset, **extra)


def _posterior(kernel: VSKernel, X, y, m, s, dataset, constant=False, **extra) -> TrainedSurrogate:
    K, _ = kernel.tree.forward(X)
    L, jitter = _factor(K)
    mu, alpha, sigma2 = _profile(L, y)
    n = len(y)
    if constant:
        sigma2 = VARIANCE_FLOOR
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    ll = -0.5 * n * math.log(sigma2) - 0.5 * logdet - 0.5 * n * (1.0 + math.log(2.0 * math.pi))
    return TrainedSurrogate(
        kernel=kernel,
        mu=mu,
        sigma2=sigma2,
        chol=L,
        alpha=alpha,
        y_mean=m,
        y_std=s,
        X=X,
        dataset=dataset,
        jitter=jitter,
        log_likelihood=ll,
        constant=constant,
        **extra,
    )


def fit(
    dataset: Dataset,
    kernel: VSKernel,
    seed: int | np.random.Generator | None = None,
    n_restarts: int = N_RESTARTS,
    maxiter: int = 200,
    ftol: float = 1e-7,
) -> TrainedSurrogate:
    """Maximize the concentrated likelihood by multi-start L-BFGS-B."""
    if len(dataset) < 1:
        raise FitError("empty dataset")
    rng = np.random.default_rng(seed)
    X = kernel.encoder.columns(dataset.points)
    y, m, s = _standardize(dataset.y)
    _check_conflicts(X, y)
    template = kernel
    tree0 = kernel.tree
    hv = pack(tree0)
    extra = {"template": template, "seed": seed if isinstance(seed, (int, type(None))) else None}
    if np.all(y == 0.0) or len(dataset) < 2 or len(hv) == 0:
        # nothing to learn: keep default hyperparameters
        return _posterior(kernel, X, y, m, s, dataset, constant=bool(np.all(y == 0.0)), **extra)

    def objective(u):
        try:
            return _neg_ll_and_grad(unpack(tree0, u), X, y)
        except FitError:
            return 1e25, np.zeros_like(u)

    best_u, best_val = None, math.inf
    inits = []
    bounds = list(zip(hv.lower, hv.upper))
    for u0 in _starts(tree0, rng, n_restarts):
        f0 = objective(u0)[0]
        inits.append(-f0)
        res = minimize(objective, u0, jac=True, method="L-BFGS-B", bounds=bounds, options={"maxiter": maxiter, "ftol": ftol})
        u, val = res.x, float(res.fun)
        if f0 < val:
            u, val = u0, f0
        if val < best_val:
            best_u, best_val = u, val
    if best_u is None or best_val >= 1e25:
        raise FitError("likelihood could not be evaluated at any start")
    fitted = kernel.with_tree(unpack(tree0, best_u))
    return _posterior(fitted, X, y, m, s, dataset, initial_log_likelihoods=tuple(inits), **extra)


def update(model: TrainedSurrogate, point: DesignPoint, response: float, seed=None) -> TrainedSurrogate:
    """Append one observation and refit from scratch."""
    template = model.template or model.kernel
    return fit(model.dataset.append(point, response), template, model.seed if seed is None else seed)


# -- prediction -------------------------------------------------------------


def _row_keys(X: Columns) -> np.ndarray:
    rows = np.column_stack([np.asarray(v, dtype=float) for v in X.data.values()]) + 0.0
    rows = np.ascontiguousarray(rows)
    return rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()


def _training_hits(model: TrainedSurrogate, Xs: Columns) -> tuple[np.ndarray, np.ndarray]:
    """(positions in Xs, training indices) of inputs identical to a training input."""
    if not Xs.data or list(Xs.data) != list(model.X.data):
        return np.zeros(0, np.intp), np.zeros(0, np.intp)
    index = model.training_index
    hits = [(j, index[k.tobytes()]) for j, k in enumerate(_row_keys(Xs)) if k.tobytes() in index]
    if not hits:
        return np.zeros(0, np.intp), np.zeros(0, np.intp)
    pos, idx = np.array(hits, dtype=np.intp).T
    return pos, idx


def predict_columns(model: TrainedSurrogate, Xs: Columns) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (problem units) at encoded inputs.

    A noise-free GP reproduces its data exactly: at a training input the mean
    is the observed response and the variance is 0 (the jitter residual of
    order ``jitter * sigma^2`` is dropped).
    """
    tree = model.kernel.tree
    psi = tree(model.X, Xs)  # (n, m)
    mean = model.mu + psi.T @ model.alpha
    v = solve_triangular(model.chol, psi, lower=True, check_finite=False)
    var = tree.diag(Xs) - np.sum(v * v, axis=0)
    var = model.sigma2 * np.maximum(var, 0.0)
    mean = model.y_mean + model.y_std * mean
    var = var * model.y_std**2
    pos, idx = _training_hits(model, Xs)
    if len(pos):
        mean[pos] = model.dataset.y[idx]
        var[pos] = 0.0
    return mean, var


def predict(model: TrainedSurrogate, point: DesignPoint | Sequence[DesignPoint]):
    """Predictive ``(mean, variance)`` at one point, or arrays for a sequence."""
    single = isinstance(point, DesignPoint)
    pts = [point] if single else list(point)
    Xs = model.kernel.encoder.columns(pts)
    mean, var = predict_columns(model, Xs)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
