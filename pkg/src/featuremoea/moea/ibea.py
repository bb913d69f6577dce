"""IBEA with the additive epsilon indicator on normalized objectives."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Solution, _objective_matrix


def normalize(F: np.ndarray) -> np.ndarray:
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    span[span <= 0] = 1.0
    return (F - lo) / span


def eps_indicator_matrix(F: np.ndarray) -> np.ndarray:
    """I[a, b]: smallest shift letting a weakly dominate b, i.e. max_k F[a,k] - F[b,k]."""
    return np.max(F[:, None, :] - F[None, :, :], axis=2)


def fitness(F: np.ndarray, kappa: float) -> tuple[np.ndarray, np.ndarray, float]:
    """F(x) = sum over y != x of -exp(-I(y, x) / (c kappa)); larger is better."""
    I = eps_indicator_matrix(normalize(F))
    c = float(np.abs(I).max()) or 1.0
    E = np.exp(-I / (c * kappa))
    np.fill_diagonal(E, 0.0)
    return -E.sum(axis=0), I, c


def environmental_selection(pop: Sequence[Solution], size: int, kappa: float) -> list[Solution]:
    """Drop the worst-fitness member and update the others until ``size`` remain."""
    if len(pop) <= size:
        return list(pop)
    fit, I, c = fitness(_objective_matrix(pop), kappa)
    alive = np.ones(len(pop), dtype=bool)
    for _ in range(len(pop) - size):
        masked = np.where(alive, fit, np.inf)
        worst = int(np.argmin(masked))  # lowest index on ties
        alive[worst] = False
        fit += np.exp(-I[worst] / (c * kappa))
    return [s for s, keep in zip(pop, alive) if keep]


def ibea_step(archive: Sequence[Solution], offspring: Sequence[Solution], archive_size: int,
              kappa: float = 0.05) -> list[Solution]:
    return environmental_selection(list(archive) + list(offspring), archive_size, kappa)


class IBEAState:
    def __init__(self, pop: list[Solution], archive_size: int, kappa: float):
        self.archive_size = archive_size
        self.kappa = kappa
        self.population = environmental_selection(pop, archive_size, kappa)
        self._fit = fitness(_objective_matrix(self.population), kappa)[0]

    def _tournament(self, rng: np.random.Generator) -> Solution:
        i, j = (int(x) for x in rng.integers(len(self.population), size=2))
        if self._fit[i] > self._fit[j] or (self._fit[i] == self._fit[j] and i < j):
            return self.population[i]
        return self.population[j]

    def offspring(self, n: int, vary: Callable, rng: np.random.Generator) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []
        while len(out) < n:
            out.extend(vary(self._tournament(rng), self._tournament(rng)))
        return out[:n]

    def survive(self, children: list[Solution]) -> None:
        self.population = ibea_step(self.population, children, self.archive_size, self.kappa)
        self._fit = fitness(_objective_matrix(self.population), self.kappa)[0]
