"""Knee-point selection on a two-objective non-dominated front.

The line through the two extreme solutions (each the worst on one objective)
is written a·f + b·g + c = 0. Points below-left of it (ε < 0) get a positive
distance; the knee is the point farthest on that side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .moea.core import Solution, _objective_matrix

TIE_TOL = 1e-12


@dataclass(frozen=True)
class KneeResult:
    chosen: Solution
    index: int
    distance: float
    extremes: tuple[Solution, Solution]
    a: float
    b: float
    c: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "assignment": list(self.chosen.assignment),
            "objectives": list(self.chosen.objectives),
            "distance": self.distance,
            "extremes": [list(e.objectives) for e in self.extremes],
            "line": [self.a, self.b, self.c],
        }


def perpendicular_distance(x: Sequence[float], a: float, b: float, c: float) -> float:
    norm = math.hypot(a, b)
    if norm == 0.0:
        raise ValueError("degenerate line coefficients (a, b) = (0, 0)")
    eps = a * x[0] + b * x[1] + c
    d = abs(eps) / norm
    return d if eps < 0 else -d


def line_through(p1: Sequence[float], p2: Sequence[float]) -> tuple[float, float, float]:
    """Coefficients with p1 = worst on the first objective, p2 = worst on the second."""
    a = p2[1] - p1[1]
    b = p1[0] - p2[0]
    c = -(a * p1[0] + b * p1[1])
    return a, b, c


def _extreme(F: np.ndarray, k: int) -> int:
    worst = F[:, k].max()
    idx = np.flatnonzero(F[:, k] == worst)
    return int(min(idx, key=lambda i: tuple(F[i])))


def select_knee(front: Sequence[Solution], rng: np.random.Generator) -> KneeResult:
    if not front:
        raise ValueError("empty front")
    F = _objective_matrix(front)
    if F.shape[1] != 2:
        raise ValueError(f"knee selection supports two objectives, got {F.shape[1]}")
    e1, e2 = _extreme(F, 0), _extreme(F, 1)
    a, b, c = line_through(F[e1], F[e2])
    if a == 0.0 and b == 0.0:
        return KneeResult(front[0], 0, 0.0, (front[e1], front[e2]), a, b, c)
    d = -(F @ np.array([a, b]) + c) / math.hypot(a, b)
    best = d.max()
    ties = np.flatnonzero(d >= best - TIE_TOL * max(1.0, abs(best)))
    i = int(ties[0]) if len(ties) == 1 else int(rng.choice(ties))
    return KneeResult(front[i], i, float(d[i]), (front[e1], front[e2]), a, b, c)
