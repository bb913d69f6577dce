"""MOEA/D with stable-matching survival selection.

Subproblems rank solutions by Tchebycheff value (convergence); solutions rank
subproblems by the perpendicular distance between their normalized objective
vector and the subproblem's weight direction (diversity). A subproblem-proposing
deferred-acceptance matching picks one solution per subproblem.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from .core import Solution, _objective_matrix

EPS_WEIGHT = 1e-6


def tchebycheff(objectives: Sequence[float], weight: Sequence[float], ideal: Sequence[float],
                eps: float = EPS_WEIGHT) -> float:
    if not len(objectives) == len(weight) == len(ideal):
        raise ValueError("objectives, weight and ideal must have equal length")
    return max(max(w, eps) * abs(f - z) for f, w, z in zip(objectives, weight, ideal))


def simplex_lattice(n: int, m: int = 2) -> np.ndarray:
    """``n`` evenly spread weight vectors on the (m-1)-simplex."""
    if m == 2:
        t = np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5])
        return np.column_stack([t, 1.0 - t])
    for h in itertools.count(1):
        pts = [c for c in itertools.product(range(h + 1), repeat=m) if sum(c) == h]
        if len(pts) == n:
            return np.array(pts, dtype=float) / h
        if len(pts) > n:
            raise ValueError(f"no simplex lattice with exactly {n} points for {m} objectives")


def neighborhoods(weights: np.ndarray, size: int) -> np.ndarray:
    d = np.linalg.norm(weights[:, None, :] - weights[None, :, :], axis=2)
    return np.argsort(d, axis=1, kind="stable")[:, : min(size, len(weights))]


def preferences(F: np.ndarray, weights: np.ndarray, ideal: np.ndarray, nadir: np.ndarray):
    """(subproblem → ranked solutions, solution → ranked subproblems)."""
    span = nadir - ideal
    span[span <= 0] = 1.0
    G = (F - ideal) / span
    W = np.maximum(weights, EPS_WEIGHT)
    tch = np.max(W[:, None, :] * np.abs(G[None, :, :]), axis=2)  # (n_sub, n_sol)
    unit = weights / np.linalg.norm(weights, axis=1, keepdims=True)
    proj = G @ unit.T  # (n_sol, n_sub)
    dist = np.sqrt(np.maximum((G ** 2).sum(axis=1)[:, None] - proj ** 2, 0.0))
    sub_pref = np.argsort(tch, axis=1, kind="stable")
    sol_pref = np.argsort(dist, axis=1, kind="stable")
    return sub_pref, sol_pref


def stable_matching(sub_pref: np.ndarray, sol_pref: np.ndarray) -> list[int]:
    """Deferred acceptance with subproblems proposing; returns the solution for each subproblem."""
    n_sub = len(sub_pref)
    n_sol = len(sol_pref)
    if n_sol < n_sub:
        raise ValueError("need at least as many solutions as subproblems")
    rank_of = np.empty((n_sol, n_sub), dtype=int)
    for s in range(n_sol):
        rank_of[s, sol_pref[s]] = np.arange(n_sub)
    next_choice = [0] * n_sub
    holder = [-1] * n_sol  # subproblem currently held by each solution
    free = list(range(n_sub))[::-1]
    while free:
        p = free.pop()
        s = int(sub_pref[p][next_choice[p]])
        next_choice[p] += 1
        q = holder[s]
        if q == -1:
            holder[s] = p
        elif rank_of[s, p] < rank_of[s, q]:
            holder[s] = p
            free.append(q)
        else:
            free.append(p)
    match = [-1] * n_sub
    for s, p in enumerate(holder):
        if p != -1:
            match[p] = s
    return match


def is_stable(match: Sequence[int], sub_pref: np.ndarray, sol_pref: np.ndarray) -> bool:
    n_sub = len(sub_pref)
    partner = {s: p for p, s in enumerate(match)}
    for p in range(n_sub):
        prefs = list(sub_pref[p])
        mine = prefs.index(match[p])
        for s in prefs[:mine]:
            q = partner.get(int(s))
            if q is None:
                return False
            sp = list(sol_pref[s])
            if sp.index(p) < sp.index(q):
                return False
    return True


def moead_stm_step(pop: Sequence[Solution], weights: np.ndarray, ideal: np.ndarray) -> list[Solution]:
    F = _objective_matrix(pop)
    nadir = F.max(axis=0)
    sub_pref, sol_pref = preferences(F, weights, np.asarray(ideal, dtype=float), nadir)
    return [pop[s] for s in stable_matching(sub_pref, sol_pref)]


class MOEADSTMState:
    def __init__(self, pop: list[Solution], n_weights: int, neighborhood: int):
        if n_weights != len(pop):
            raise ValueError("weight-vector count must equal the population size")
        m = len(pop[0].objectives)
        self.weights = simplex_lattice(n_weights, m)
        self.neigh = neighborhoods(self.weights, neighborhood)
        self.ideal = _objective_matrix(pop).min(axis=0)
        self.population = pop

    def offspring(self, n: int, vary: Callable, rng: np.random.Generator) -> list[tuple[int, ...]]:
        out = []
        for i in range(n):
            k, l = rng.choice(self.neigh[i % len(self.neigh)], 2, replace=False)
            out.append(vary(self.population[int(k)], self.population[int(l)])[0])
        return out

    def survive(self, children: list[Solution]) -> None:
        if children:
            self.ideal = np.minimum(self.ideal, _objective_matrix(children).min(axis=0))
        self.population = moead_stm_step(self.population + children, self.weights, self.ideal)
