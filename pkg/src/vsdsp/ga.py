"""A small mixed continuous/discrete genetic algorithm with constraint domination.

Genes are continuous values in [0, 1] and discrete level indices. The
caller supplies a batch evaluator returning, per individual, an objective
to minimize, a constraint excess (0 when acceptable) and a tie-break value.
Ranking: acceptable individuals before the others; among unacceptable ones
smaller excess first; among acceptable ones smaller objective first; then
smaller tie-break; then earlier creation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["GAConfig", "GAResult", "Scores", "ga_minimize", "rank_order"]


@dataclass(frozen=True)
class GAConfig:
    pop_size: int | None = None  # default max(50, 10 d)
    generations: int = 50
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # per gene, default 1/d
    tournament: int = 3
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    seed: int | None = None

    def __post_init__(self):
        if self.pop_size is not None and self.pop_size < 2:
            raise ValueError("population size must be at least 2")
        if self.generations < 0 or self.tournament < 1:
            raise ValueError("generations must be >= 0 and tournament size >= 1")
        for p in (self.crossover_prob, self.mutation_prob):
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")

    def population(self, dim: int) -> int:
        return self.pop_size if self.pop_size is not None else max(50, 10 * dim)

    def mutation(self, dim: int) -> float:
        return self.mutation_prob if self.mutation_prob is not None else 1.0 / max(dim, 1)


@dataclass
class Scores:
    obj: np.ndarray
    excess: np.ndarray
    tie: np.ndarray


@dataclass
class GAResult:
    u: np.ndarray
    z: np.ndarray
    obj: float
    excess: float
    tie: float
    archive_U: np.ndarray | None = None
    archive_Z: np.ndarray | None = None


Evaluator = Callable[[np.ndarray, np.ndarray], Scores]


def rank_order(s: Scores, age: np.ndarray | None = None) -> np.ndarray:
    """Indices sorted best first under the domination ordering."""
    bad = s.excess > 0
    primary = np.where(bad, s.excess, s.obj)
    age = np.arange(len(s.obj)) if age is None else age
    return np.lexsort((age, s.tie, primary, bad))


def _sbx(p1, p2, eta, rng):
    u = rng.random(p1.shape)
    beta = np.where(u <= 0.5, (2 * u) ** (1 / (eta + 1)), (1 / (2 * (1 - u))) ** (1 / (eta + 1)))
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    swap = rng.random(p1.shape) < 0.5
    c1, c2 = np.where(swap, c2, c1), np.where(swap, c1, c2)
    return np.clip(c1, 0, 1), np.clip(c2, 0, 1)


def _poly_mutation(x, prob, eta, rng):
    u = rng.random(x.shape)
    delta = np.where(u < 0.5, (2 * u) ** (1 / (eta + 1)) - 1, 1 - (2 * (1 - u)) ** (1 / (eta + 1)))
    hit = rng.random(x.shape) < prob
    return np.clip(np.where(hit, x + delta, x), 0, 1)


def _concat(a: Scores, b: Scores) -> Scores:
    return Scores(*(np.concatenate([getattr(a, k), getattr(b, k)]) for k in ("obj", "excess", "tie")))


def _take(s: Scores, idx) -> Scores:
    return Scores(s.obj[idx], s.excess[idx], s.tie[idx])


def ga_minimize(
    evaluate: Evaluator,
    n_x: int,
    n_levels: Sequence[int],
    config: GAConfig,
    rng: np.random.Generator,
    keep_archive: bool = False,
    seeds: tuple[np.ndarray, np.ndarray] | None = None,
) -> GAResult:
    """Evolve a population with (mu + lambda) survival and return the best individual.

    ``seeds`` optionally injects known individuals into the initial population.
    """
    n_levels = np.asarray(n_levels, dtype=np.intp)
    n_z = len(n_levels)
    dim = n_x + n_z
    pop = config.population(dim)
    pm = config.mutation(dim)
    U = rng.random((pop, n_x))
    Z = (rng.random((pop, n_z)) * n_levels).astype(np.intp) if n_z else np.zeros((pop, 0), np.intp)
    if seeds is not None:
        su, sz = seeds
        k = min(len(su), pop)
        U[:k], Z[:k] = su[:k], sz[:k]
    S = evaluate(U, Z)
    age = np.arange(pop)
    counter = pop
    arch_U, arch_Z = ([U], [Z]) if keep_archive else (None, None)
    for _ in range(config.generations):
        order = rank_order(S, age)
        rank = np.empty(pop, dtype=np.intp)
        rank[order] = np.arange(pop)
        # tournament selection on rank
        cand = rng.integers(pop, size=(pop, config.tournament))
        parents = cand[np.arange(pop), np.argmin(rank[cand], axis=1)]
        P1, P2 = parents[0::2], parents[1::2]
        m = min(len(P1), len(P2))
        P1, P2 = P1[:m], P2[:m]
        cU1, cU2 = U[P1].copy(), U[P2].copy()
        cZ1, cZ2 = Z[P1].copy(), Z[P2].copy()
        do = rng.random(m) < config.crossover_prob
        if n_x:
            a, b = _sbx(cU1, cU2, config.eta_crossover, rng)
            cU1 = np.where(do[:, None], a, cU1)
            cU2 = np.where(do[:, None], b, cU2)
        if n_z:
            swap = (rng.random((m, n_z)) < 0.5) & do[:, None]
            cZ1, cZ2 = np.where(swap, cZ2, cZ1), np.where(swap, cZ1, cZ2)
        CU = np.vstack([cU1, cU2])
        CZ = np.vstack([cZ1, cZ2])
        if n_x:
            CU = _poly_mutation(CU, pm, config.eta_mutation, rng)
        if n_z:
            hit = rng.random(CZ.shape) < pm
            CZ = np.where(hit, (rng.random(CZ.shape) * n_levels).astype(np.intp), CZ)
        CS = evaluate(CU, CZ)
        if keep_archive:
            arch_U.append(CU)
            arch_Z.append(CZ)
        cage = counter + np.arange(len(CU))
        counter += len(CU)
        allU, allZ = np.vstack([U, CU]), np.vstack([Z, CZ])
        allS, allage = _concat(S, CS), np.concatenate([age, cage])
        keep = rank_order(allS, allage)[:pop]
        U, Z, S, age = allU[keep], allZ[keep], _take(allS, keep), allage[keep]
    best = rank_order(S, age)[0]
    return GAResult(
        u=U[best].copy(),
        z=Z[best].copy(),
        obj=float(S.obj[best]),
        excess=float(S.excess[best]),
        tie=float(S.tie[best]),
        archive_U=np.vstack(arch_U) if keep_archive else None,
        archive_Z=np.vstack(arch_Z) if keep_archive else None,
    )
