"""Brute-force reference optimum of a sub-problem.

Every discrete category is enumerated. For each, a batch of random starts
is improved by coordinate-wise direct search (a step along one axis is kept
when it wins under feasibility rules), the step halving after a sweep
without progress. The best result of each category is then polished with
SLSQP and kept only if still feasible and better. Results are cached as
plain text.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from ..design_space import DesignPoint, ProblemDefinition, SubProblem

__all__ = ["ReferenceResult", "reference_optimum", "global_reference"]

DEFAULT_CACHE = Path(os.environ.get("VSDSP_CACHE", Path.home() / ".cache" / "vsdsp"))


@dataclass(frozen=True)
class ReferenceResult:
    sub_problem: int
    f: float
    point: DesignPoint | None
    feasible: bool
    effort: int
    seed: int


def _batch(problem: ProblemDefinition, sp: SubProblem):
    if problem.batch_evaluator is not None:
        return lambda X, Z: problem.batch_evaluator(sp, X, Z)

    def loop(X, Z):
        fs, gs = [], []
        for x, z in zip(X, Z):
            p = DesignPoint(
                w=sp.w_dict,
                x=dict(zip(sp.active_continuous, map(float, x))),
                z=dict(zip(sp.active_discrete, map(int, z))),
            )
            f, g = problem.evaluator(p)
            fs.append(f)
            gs.append([g[c] for c in sp.active_constraints])
        return np.array(fs), np.array(gs).reshape(len(fs), len(sp.active_constraints))

    return loop


def _better(f_new, v_new, f_old, v_old):
    """Feasibility rules: feasible beats infeasible, then objective or violation."""
    feas_new, feas_old = v_new <= 0, v_old <= 0
    return np.where(feas_new & feas_old, f_new < f_old, np.where(feas_new | feas_old, feas_new, v_new < v_old))


def _violation(G):
    return np.maximum(G, 0.0).sum(axis=1) if G.shape[1] else np.zeros(len(G))


def _direct_search(fun, lo, hi, X0, Z, tol=1e-9, max_sweeps=400):
    X = X0.copy()
    f, G = fun(X, Z)
    v = _violation(G)
    step = np.full(len(X), 0.25)
    span = hi - lo
    for _ in range(max_sweeps):
        moved = np.zeros(len(X), dtype=bool)
        for j in range(X.shape[1]):
            for sign in (1.0, -1.0):
                Y = X.copy()
                Y[:, j] = np.clip(X[:, j] + sign * step * span[j], lo[j], hi[j])
                fy, Gy = fun(Y, Z)
                vy = _violation(Gy)
                ok = _better(fy, vy, f, v) & (Y[:, j] != X[:, j])
                X[ok], f[ok], v[ok] = Y[ok], fy[ok], vy[ok]
                moved |= ok
        step = np.where(moved, step, step / 2)
        if np.all(step < tol):
            break
    return X, f, v


def _polish(fun, lo, hi, x, z, f, v):
    if v > 0:
        return x, f, v
    n_g = fun(x[None], z[None])[1].shape[1]
    cons = [{"type": "ineq", "fun": lambda y, k=k: -fun(y[None], z[None])[1][0, k]} for k in range(n_g)]
    try:
        res = minimize(
            lambda y: float(fun(y[None], z[None])[0][0]),
            x,
            method="SLSQP",
            bounds=list(zip(lo, hi)),
            constraints=cons,
            options={"ftol": 1e-14, "maxiter": 500},
        )
    except (ValueError, np.linalg.LinAlgError):
        return x, f, v
    y = np.clip(res.x, lo, hi)
    fy, Gy = fun(y[None], z[None])
    vy = _violation(Gy)[0]
    if vy <= 0 and fy[0] < f:
        return y, float(fy[0]), 0.0
    return x, f, v


def _cache_file(cache_dir: Path, problem: ProblemDefinition, sp: SubProblem, effort: int, seed: int) -> Path:
    return Path(cache_dir) / f"{problem.name}_sp{sp.id}_e{effort}_s{seed}.txt"


def _write_cache(path: Path, r: ReferenceResult, sp: SubProblem) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# effort {r.effort}", f"# seed {r.seed}", f"# sub_problem {r.sub_problem}", f"feasible {int(r.feasible)}"]
    lines.append(f"f {r.f:.17g}")
    if r.point is not None:
        lines += [f"x {k} {v:.17g}" for k, v in r.point.x.items()]
        lines += [f"z {k} {v}" for k, v in r.point.z.items()]
    tmp = path.with_suffix(".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    tmp.replace(path)


def _read_cache(path: Path, sp: SubProblem) -> ReferenceResult:
    meta, x, z = {}, {}, {}
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if parts[0] == "#":
            meta[parts[1]] = int(parts[2])
        elif parts[0] == "x":
            x[parts[1]] = float(parts[2])
        elif parts[0] == "z":
            z[parts[1]] = int(parts[2])
        else:
            meta[parts[0]] = float(parts[1])
    feasible = bool(meta["feasible"])
    point = DesignPoint(w=sp.w_dict, x=x, z=z) if feasible else None
    return ReferenceResult(sp.id, meta["f"], point, feasible, meta["effort"], meta["seed"])


def reference_optimum(
    problem: ProblemDefinition,
    sub_problem: SubProblem | int,
    effort: int = 100,
    seed: int = 0,
    cache_dir: str | Path | None = DEFAULT_CACHE,
) -> ReferenceResult:
    """Best feasible objective of one sub-problem (``f = inf`` if none found)."""
    sp = problem.sub_problems[sub_problem] if isinstance(sub_problem, int) else sub_problem
    if cache_dir is not None:
        path = _cache_file(Path(cache_dir), problem, sp, effort, seed)
        if path.exists():
            return _read_cache(path, sp)
    rng = np.random.default_rng([seed, sp.id])
    fun = _batch(problem, sp)
    cont = [problem.variables[n] for n in sp.active_continuous]
    lo = np.array([v.lower for v in cont])
    hi = np.array([v.upper for v in cont])
    combos = list(itertools.product(*(problem.variables[n].levels for n in sp.active_discrete)))
    cats = np.array(combos, dtype=np.intp).reshape(len(combos), len(sp.active_discrete))
    Z = np.repeat(cats, effort, axis=0)
    X0 = lo + rng.random((len(Z), len(cont))) * (hi - lo)
    X, f, v = _direct_search(fun, lo, hi, X0, Z)
    best = None
    for c in range(len(cats)):
        rows = slice(c * effort, (c + 1) * effort)
        fc, vc = f[rows], v[rows]
        feas = vc <= 0
        i = int(np.argmin(np.where(feas, fc, np.inf))) if feas.any() else int(np.argmin(vc))
        k = c * effort + i
        x, fk, vk = _polish(fun, lo, hi, X[k], Z[k], float(f[k]), float(v[k]))
        if vk <= 0 and (best is None or fk < best[1]):
            best = (x, fk, Z[k])
    if best is None:
        result = ReferenceResult(sp.id, float("inf"), None, False, effort, seed)
    else:
        x, fk, z = best
        point = DesignPoint(
            w=sp.w_dict,
            x={n: float(val) for n, val in zip(sp.active_continuous, x)},
            z={n: int(val) for n, val in zip(sp.active_discrete, z)},
        )
        result = ReferenceResult(sp.id, float(fk), point, True, effort, seed)
    if cache_dir is not None:
        _write_cache(path, result, sp)
    return result


def global_reference(problem: ProblemDefinition, effort: int = 100, seed: int = 0, cache_dir=DEFAULT_CACHE):
    """Best reference optimum across all sub-problems, plus the per-sub-problem table."""
    table = [reference_optimum(problem, sp, effort, seed, cache_dir) for sp in problem.sub_problems]
    best = min(table, key=lambda r: r.f)
    return best, table
