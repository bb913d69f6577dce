"""Shared MOEA machinery: solutions, problems, dominance, and the run loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..dependency import DependencyChains, ValueTree
from ..operators import (
    DEPENDENCY_AWARE,
    PLAIN,
    OperatorContext,
    OperatorStats,
    crossover,
    mutate,
    random_assignment,
    random_valid_assignment,
)
from ..transposition import ChromosomeSpec

NSGA2 = "nsga2"
IBEA = "ibea"
MOEAD_STM = "moead-stm"
ALGORITHMS = (NSGA2, IBEA, MOEAD_STM)


@dataclass(slots=True)
class Solution:
    assignment: tuple[int, ...]
    objectives: tuple[float, ...] = ()  # minimized
    valid: bool = True


class ObjectiveProblem:
    """Objective functions over gene assignments.

    ``senses`` holds "min" or "max" per objective; the engine minimizes
    internally and negates maximized objectives.
    """

    def __init__(
        self,
        evaluate: Callable[[Sequence[int]], Sequence[float]],
        senses: Sequence[str],
        is_valid: Callable[[Sequence[int]], bool] | None = None,
    ):
        for s in senses:
            if s not in ("min", "max"):
                raise ValueError(f"sense must be 'min' or 'max', got {s!r}")
        self._evaluate = evaluate
        self._is_valid = is_valid
        self.senses = tuple(senses)
        self.signs = tuple(-1.0 if s == "max" else 1.0 for s in senses)
        self.evaluations = 0
        self.valid_evaluations = 0

    @property
    def n_objectives(self) -> int:
        return len(self.senses)

    def evaluate(self, assignment: Sequence[int]) -> tuple[float, ...]:
        self.evaluations += 1
        raw = tuple(float(x) for x in self._evaluate(assignment))
        if len(raw) != self.n_objectives:
            raise ValueError(f"expected {self.n_objectives} objectives, got {len(raw)}")
        return raw

    def is_valid(self, assignment: Sequence[int]) -> bool:
        return True if self._is_valid is None else bool(self._is_valid(assignment))

    def to_raw(self, objectives: Sequence[float]) -> tuple[float, ...]:
        return tuple(s * v for s, v in zip(self.signs, objectives))

    def make(self, assignment: Sequence[int]) -> Solution:
        assignment = tuple(assignment)
        try:
            raw = self.evaluate(assignment)
        except Exception as e:  # noqa: BLE001 - add context, keep the cause
            raise RuntimeError(f"objective evaluation failed for {assignment}") from e
        ok = self.is_valid(assignment)
        self.valid_evaluations += ok
        return Solution(assignment, tuple(s * v for s, v in zip(self.signs, raw)), ok)


@dataclass(frozen=True)
class RunConfig:
    pop_size: int = 100
    generations: int = 10
    mutation_rate: float = 0.1
    crossover_rate: float = 0.9
    algorithm: str = NSGA2
    seed: int = 0
    operators: str = DEPENDENCY_AWARE
    ibea_kappa: float = 0.05
    archive_size: int = 500
    n_weights: int | None = None  # defaults to pop_size
    neighborhood: int = 20

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.operators not in (DEPENDENCY_AWARE, PLAIN):
            raise ValueError(f"unknown operator mode {self.operators!r}")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.algorithm == IBEA and self.archive_size < self.pop_size:
            raise ValueError("IBEA archive must hold at least one population")

    @property
    def budget(self) -> int:
        return self.pop_size * max(self.generations, 1)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    evaluations: int
    best: tuple[float, ...]
    median: tuple[float, ...]
    valid_fraction: float


@dataclass
class RunResult:
    front: list[Solution]
    population: list[Solution]
    log: list[GenerationRecord]
    evaluations: int
    valid_evaluations: int
    operator_stats: OperatorStats = field(default_factory=OperatorStats)

    @property
    def valid_fraction(self) -> float:
        return sum(s.valid for s in self.population) / len(self.population)


# ---------------------------------------------------------------------------
# dominance


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def _objective_matrix(pop: Sequence[Solution]) -> np.ndarray:
    return np.array([s.objectives for s in pop], dtype=float).reshape(len(pop), -1)


def domination_matrix(F: np.ndarray) -> np.ndarray:
    """D[i, j] is True when row i dominates row j."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_ranks(F: np.ndarray) -> np.ndarray:
    n = len(F)
    ranks = np.zeros(n, dtype=int)
    if n == 0:
        return ranks
    D = domination_matrix(F)
    count = D.sum(axis=0)  # number of dominators
    current = np.flatnonzero(count == 0)
    r = 0
    assigned = np.zeros(n, dtype=bool)
    while len(current):
        ranks[current] = r
        assigned[current] = True
        count = count - D[current].sum(axis=0)
        nxt = np.flatnonzero((count == 0) & ~assigned)
        current = nxt
        r += 1
    return ranks


def nondominated_sort(pop: Sequence[Solution]) -> list[list[Solution]]:
    if not pop:
        return []
    ranks = nondominated_ranks(_objective_matrix(pop))
    fronts: list[list[Solution]] = [[] for _ in range(ranks.max() + 1)]
    for s, r in zip(pop, ranks):
        fronts[r].append(s)
    return fronts


def get_nondominated(pop: Sequence[Solution]) -> list[Solution]:
    return nondominated_sort(pop)[0] if pop else []


def crowding_distance_matrix(F: np.ndarray) -> np.ndarray:
    n, m = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = math.inf
        return dist
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = math.inf
        if span <= 0:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def crowding_distance(front: Sequence[Solution]) -> list[float]:
    if not front:
        raise ValueError("empty front")
    return crowding_distance_matrix(_objective_matrix(front)).tolist()


# ---------------------------------------------------------------------------
# run loop


def _record(gen: int, problem: ObjectiveProblem, pop: Sequence[Solution]) -> GenerationRecord:
    raw = np.array([problem.to_raw(s.objectives) for s in pop])
    best = tuple(
        float(raw[:, k].max() if problem.senses[k] == "max" else raw[:, k].min())
        for k in range(raw.shape[1])
    )
    return GenerationRecord(
        gen,
        problem.evaluations,
        best,
        tuple(float(x) for x in np.median(raw, axis=0)),
        sum(s.valid for s in pop) / len(pop),
    )


def run(
    problem: ObjectiveProblem,
    spec: ChromosomeSpec,
    trees: Mapping[int, ValueTree],
    chains: DependencyChains,
    cfg: RunConfig,
    state_factory: Callable | None = None,
) -> RunResult:
    """One optimization run. ``state_factory(pop)`` overrides the algorithm's survival state."""
    from . import ibea, moead_stm, nsga2

    rng = np.random.default_rng(cfg.seed)
    ctx = OperatorContext(spec, trees, chains, rng, cfg.operators)
    start_evals = problem.evaluations
    start_valid = problem.valid_evaluations

    if cfg.operators == DEPENDENCY_AWARE:
        init = [random_valid_assignment(ctx) for _ in range(cfg.pop_size)]
    else:
        init = [random_assignment(ctx) for _ in range(cfg.pop_size)]
    pop = [problem.make(a) for a in init]
    log = [_record(0, problem, pop)]

    def vary(p1: Solution, p2: Solution) -> tuple[tuple[int, ...], tuple[int, ...]]:
        a, b = crossover(p1.assignment, p2.assignment, cfg.crossover_rate, ctx)
        return mutate(a, cfg.mutation_rate, ctx), mutate(b, cfg.mutation_rate, ctx)

    if state_factory is not None:
        state = state_factory(pop)
    elif cfg.algorithm == NSGA2:
        state = nsga2.NSGA2State(pop)
    elif cfg.algorithm == IBEA:
        state = ibea.IBEAState(pop, cfg.archive_size, cfg.ibea_kappa)
    else:
        state = moead_stm.MOEADSTMState(pop, cfg.n_weights or cfg.pop_size, cfg.neighborhood)

    for gen in range(1, max(cfg.generations, 1)):
        children = state.offspring(cfg.pop_size, vary, rng)
        evaluated = [problem.make(a) for a in children]
        state.survive(evaluated)
        log.append(_record(gen, problem, state.population))

    population = list(state.population)
    return RunResult(
        front=get_nondominated(population),
        population=population,
        log=log,
        evaluations=problem.evaluations - start_evals,
        valid_evaluations=problem.valid_evaluations - start_valid,
        operator_stats=ctx.stats,
    )
