"""NSGA-II: rank-and-crowding survival with binary tournament mating."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Solution, _objective_matrix, crowding_distance_matrix, nondominated_ranks


def rank_and_crowding(pop: Sequence[Solution]) -> tuple[np.ndarray, np.ndarray]:
    F = _objective_matrix(pop)
    ranks = nondominated_ranks(F)
    crowd = np.zeros(len(pop))
    for r in range(ranks.max() + 1 if len(pop) else 0):
        idx = np.flatnonzero(ranks == r)
        crowd[idx] = crowding_distance_matrix(F[idx])
    return ranks, crowd


def survival(pop: Sequence[Solution], size: int) -> list[Solution]:
    """Fill by rank, truncate the last front by crowding; ties go to the lower index."""
    ranks, crowd = rank_and_crowding(pop)
    order = sorted(range(len(pop)), key=lambda i: (ranks[i], -crowd[i], i))
    return [pop[i] for i in sorted(order[:size])]


class NSGA2State:
    def __init__(self, pop: list[Solution]):
        self.population = pop
        self._ranks, self._crowd = rank_and_crowding(pop)

    def _tournament(self, rng: np.random.Generator) -> Solution:
        i, j = (int(x) for x in rng.integers(len(self.population), size=2))
        key_i = (self._ranks[i], -self._crowd[i], i)
        key_j = (self._ranks[j], -self._crowd[j], j)
        return self.population[i if key_i <= key_j else j]

    def offspring(self, n: int, vary: Callable, rng: np.random.Generator) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []
        while len(out) < n:
            out.extend(vary(self._tournament(rng), self._tournament(rng)))
        return out[:n]

    def survive(self, children: list[Solution]) -> None:
        self.population = survival(self.population + children, len(self.population))
        self._ranks, self._crowd = rank_and_crowding(self.population)
