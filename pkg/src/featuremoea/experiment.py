"""Variants, single optimizations and multi-timestep simulations on the SOA benchmark.

Variants:

* ``FEMOSAA``      dependency-aware operators, knee selection
* ``FEMOSAA-K``    plain operators, knee selection; invalid finals filtered, repaired if none valid
* ``FEMOSAA-D``    dependency-aware operators, random pick from the front
* ``FEMOSAA-N``    plain operators, random pick, filter/repair as for K
* ``FEMOSAA-0/1``  FEMOSAA-N on one bit per feature; a multi-selected XOR group keeps one
                   member chosen at random
* ``PLATO``        plain operators, equal-weight sum of min-max normalized objectives
* ``DUSE``         alias of FEMOSAA-N under NSGA-II
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dependency import DependencyChains, Transposed, merge_dependencies, transpose
from .feature_model import XOR, FeatureModel, is_valid_configuration
from .knee import select_knee
from .moea.core import NSGA2, ObjectiveProblem, RunConfig, RunResult, Solution, _objective_matrix, get_nondominated, run
from .operators import DEPENDENCY_AWARE, PLAIN, OperatorContext, check_validity, repair
from .sas_bench import EnvTrace, InstanceDecoder, SoaKnobs, SoaSystem, cost, env_step, generate_soa, throughput
from .transposition import ChromosomeSpec, GeneSpec, Option

FEMOSAA = "FEMOSAA"
FEMOSAA_K = "FEMOSAA-K"
FEMOSAA_D = "FEMOSAA-D"
FEMOSAA_N = "FEMOSAA-N"
FEMOSAA_01 = "FEMOSAA-0/1"
PLATO = "PLATO"
DUSE = "DUSE"

DEFAULT_SYSTEM_SEED = 0


@dataclass(frozen=True)
class Variant:
    name: str
    operators: str
    pick: str  # "knee" | "random" | "aggregate"
    encoding: str = "elitist"  # or "binary"
    filter_invalid: bool = False
    repair_if_none: bool = False
    algorithm: str | None = None  # forced algorithm


VARIANTS = {
    v.name: v
    for v in (
        Variant(FEMOSAA, DEPENDENCY_AWARE, "knee"),
        Variant(FEMOSAA_K, PLAIN, "knee", filter_invalid=True, repair_if_none=True),
        Variant(FEMOSAA_D, DEPENDENCY_AWARE, "random"),
        Variant(FEMOSAA_N, PLAIN, "random", filter_invalid=True, repair_if_none=True),
        Variant(FEMOSAA_01, PLAIN, "random", encoding="binary", filter_invalid=True),
        Variant(PLATO, PLAIN, "aggregate", filter_invalid=True, repair_if_none=True),
        Variant(DUSE, PLAIN, "random", filter_invalid=True, repair_if_none=True, algorithm=NSGA2),
    )
}


@dataclass(frozen=True)
class Profile:
    pop_size: int
    generations: int
    timesteps: int


PROFILES = {"paper": Profile(100, 10, 102), "ci": Profile(40, 5, 20)}


# ---------------------------------------------------------------------------
# encodings


def binary_encoding(model: FeatureModel) -> tuple[ChromosomeSpec, dict, DependencyChains]:
    """One {Off, On} gene per non-root feature, with no dependency knowledge."""
    fids = [f for f in model.preorder if f != model.root]
    genes = tuple(
        GeneSpec(i, f, (Option("Off", None, None, True), Option("On", f)), False) for i, f in enumerate(fids)
    )
    spec = ChromosomeSpec(genes)
    return spec, merge_dependencies(spec, []), DependencyChains.from_dependencies(len(genes), [])


class SoaEvaluator:
    """Objective function (throughput, cost) with the worst sentinel for invalid assignments.

    Validity of the last evaluated assignment is cached so the engine's
    validity query does not repeat the check.
    """

    def __init__(self, system: SoaSystem, encoding: str, transposed: Transposed | None = None,
                 model: FeatureModel | None = None, spec: ChromosomeSpec | None = None):
        self.system = system
        self.encoding = encoding
        self._last: tuple | None = None
        self._last_ok = False
        if encoding == "elitist":
            self.decode = InstanceDecoder(system, transposed.spec)
            self._ctx = OperatorContext(transposed.spec, transposed.trees, transposed.chains,
                                        np.random.default_rng(0))
        else:
            self.model = model
            self.fids = [g.source_feature for g in spec.genes]
            self.value_of = {}
            for i, s in enumerate(system.services):
                for c in model.children[s]:
                    self.value_of[c] = (i, model.features[c].numeric_value)
            self.fixed = np.array([0.0 if model.children[s] else 1.0 for s in system.services])
            self.xor_groups = [g for g in model.groups.values() if g.kind == XOR]
            self.subtree = {}
            for g in self.xor_groups:
                for x in g.members:
                    stack, out = [x], []
                    while stack:
                        y = stack.pop()
                        out.append(y)
                        stack.extend(model.children[y])
                    self.subtree[x] = out
            self._cfg_key = self._cfg = None

    def valid(self, a: Sequence[int]) -> bool:
        a = tuple(a)
        if a != self._last:
            self._last = a
            self._last_ok = self._check(a)
        return self._last_ok

    def _check(self, a) -> bool:
        if self.encoding == "elitist":
            return check_validity(a, self._ctx)
        return is_valid_configuration(self.model, self._config(a))

    def _config(self, a):
        if a == self._cfg_key:
            return self._cfg
        sel = {self.model.root} | {f for f, bit in zip(self.fids, a) if bit}
        rng = None
        for g in self.xor_groups:
            on = [x for x in g.members if x in sel]
            if len(on) > 1:
                if rng is None:  # seeded by the assignment, so evaluation stays pure
                    rng = np.random.default_rng(zlib.crc32(bytes(a)))
                keep = on[int(rng.integers(len(on)))]
                for x in on:
                    if x != keep:
                        sel.difference_update(self.subtree[x])
        self._cfg_key, self._cfg = a, frozenset(sel)
        return self._cfg

    def instances(self, a: Sequence[int]) -> np.ndarray:
        if self.encoding == "elitist":
            return self.decode(a)
        n = self.fixed.copy()
        for f in self._config(tuple(a)):
            if f in self.value_of:
                i, v = self.value_of[f]
                n[i] = v
        return n

    def __call__(self, a: Sequence[int]) -> tuple[float, float]:
        ok = self.valid(a)
        n = self.instances(a)
        return throughput(self.system, n, ok), cost(self.system, n, ok)

    def problem(self) -> ObjectiveProblem:
        return ObjectiveProblem(self, ("max", "min"), self.valid)


# ---------------------------------------------------------------------------
# equal-weight aggregation (PLATO-style)


def aggregate_fitness(F: np.ndarray) -> np.ndarray:
    """Mean of per-objective min-max normalized (minimized) values; degenerate axes count 0."""
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return ((F - lo) / span).mean(axis=1)


class AggregateState:
    def __init__(self, pop: list[Solution]):
        self.population = pop
        self._fit = aggregate_fitness(_objective_matrix(pop))

    def offspring(self, n: int, vary: Callable, rng: np.random.Generator) -> list[tuple[int, ...]]:
        def pick():
            i, j = (int(x) for x in rng.integers(len(self.population), size=2))
            return self.population[i if (self._fit[i], i) <= (self._fit[j], j) else j]

        out: list[tuple[int, ...]] = []
        while len(out) < n:
            out.extend(vary(pick(), pick()))
        return out[:n]

    def survive(self, children: list[Solution]) -> None:
        pool = self.population + children
        fit = aggregate_fitness(_objective_matrix(pool))
        keep = sorted(sorted(range(len(pool)), key=lambda i: (fit[i], i))[: len(self.population)])
        self.population = [pool[i] for i in keep]
        self._fit = fit[keep]


# ---------------------------------------------------------------------------
# one optimization


@dataclass
class Decision:
    assignment: tuple[int, ...]
    valid: bool
    throughput: float
    cost: float
    index: int | None
    knee_distance: float | None
    front_size: int
    filtered: int
    repaired: bool


@dataclass
class TimestepRecord:
    timestep: int
    target_rsd: float | None
    variant: str
    algorithm: str
    seed: int
    assignment: list[int]
    valid: bool
    throughput: float
    cost: float
    knee_index: int | None
    knee_distance: float | None
    front_size: int
    valid_fraction: float
    evaluations: int
    filtered: int
    repaired: bool
    operator_stats: dict = field(default_factory=dict)


class Setup:
    """A model plus the encodings a variant needs; built once per system."""

    def __init__(self, system: SoaSystem, model: FeatureModel):
        self.system = system
        self.model = model
        self.transposed = transpose(model)
        self._binary = None

    @classmethod
    def default(cls, seed: int = DEFAULT_SYSTEM_SEED, knobs: SoaKnobs = SoaKnobs()) -> "Setup":
        return cls(*generate_soa(seed, knobs))

    @property
    def binary(self):
        if self._binary is None:
            self._binary = binary_encoding(self.model)
        return self._binary

    def evaluator(self, system: SoaSystem, variant: Variant) -> SoaEvaluator:
        if variant.encoding == "binary":
            return SoaEvaluator(system, "binary", model=self.model, spec=self.binary[0])
        return SoaEvaluator(system, "elitist", transposed=self.transposed)

    def search_space(self, variant: Variant):
        if variant.encoding == "binary":
            return self.binary
        t = self.transposed
        return t.spec, t.trees, t.chains


def optimize(setup: Setup, system: SoaSystem, variant: str | Variant, cfg: RunConfig,
             pick_seed: int | Sequence[int]) -> tuple[RunResult, Decision]:
    v = VARIANTS[variant] if isinstance(variant, str) else variant
    if v.algorithm is not None and cfg.algorithm != v.algorithm:
        cfg = RunConfig(**{**asdict(cfg), "algorithm": v.algorithm})
    if cfg.operators != v.operators:
        cfg = RunConfig(**{**asdict(cfg), "operators": v.operators})
    ev = setup.evaluator(system, v)
    problem = ev.problem()
    spec, trees, chains = setup.search_space(v)
    factory = AggregateState if v.pick == "aggregate" else None
    result = run(problem, spec, trees, chains, cfg, state_factory=factory)
    rng = np.random.default_rng(pick_seed)

    candidates = result.front
    filtered = 0
    if v.filter_invalid:
        valid = [s for s in result.population if s.valid]
        filtered = len(result.population) - len(valid)
        if valid:
            candidates = get_nondominated(valid) if v.pick != "aggregate" else valid
        elif v.pick == "aggregate":
            candidates = result.population
    elif v.pick == "aggregate":
        candidates = result.population

    index = distance = None
    if v.pick == "knee":
        k = select_knee(candidates, rng)
        chosen, index, distance = k.chosen, k.index, k.distance
    elif v.pick == "random":
        index = int(rng.integers(len(candidates)))
        chosen = candidates[index]
    else:
        fit = aggregate_fitness(_objective_matrix(candidates))
        index = int(np.argmin(fit))
        chosen = candidates[index]

    repaired = False
    if not chosen.valid and v.repair_if_none:
        t = setup.transposed
        ctx = OperatorContext(t.spec, t.trees, t.chains, rng, DEPENDENCY_AWARE)
        fixed = repair(chosen.assignment, ctx)
        if fixed is not None:
            chosen = problem.make(fixed)
            repaired = True
    raw = problem.to_raw(chosen.objectives)
    decision = Decision(chosen.assignment, chosen.valid, raw[0], raw[1], index, distance,
                        len(candidates), filtered, repaired)
    return result, decision


# ---------------------------------------------------------------------------
# simulation


def run_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence([seed, t]).generate_state(1)[0])


@dataclass
class SimulationLog:
    records: list[TimestepRecord]
    timings: list[float]  # wall-clock seconds per optimization run; kept out of records

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.records)

    def metadata(self, **extra) -> dict:
        return {
            "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "run_seconds": self.timings,
            "mean_run_seconds": float(np.mean(self.timings)) if self.timings else None,
            **extra,
        }


def records_from_jsonl(text: str) -> list[TimestepRecord]:
    out = []
    for line in text.splitlines():
        if line.strip():
            out.append(TimestepRecord(**json.loads(line)))
    return out


def simulate(setup: Setup, variant: str, cfg: RunConfig, trace: EnvTrace, timesteps: int | None = None,
             seed: int = 0) -> SimulationLog:
    """Optimize once per timestep and adopt the chosen solution."""
    n = len(trace) if timesteps is None else timesteps
    if n < 1 or n > len(trace):
        raise ValueError(f"timesteps must lie in [1, {len(trace)}]")
    records, timings = [], []
    for t in range(n):
        system_t = env_step(trace, t, setup.system)
        step_cfg = RunConfig(**{**asdict(cfg), "seed": run_seed(seed, t)})
        t0 = time.perf_counter()
        result, d = optimize(setup, system_t, variant, step_cfg, [seed, t, 1])
        timings.append(time.perf_counter() - t0)
        records.append(TimestepRecord(
            timestep=t,
            target_rsd=float(trace.target_rsd[t]),
            variant=variant,
            algorithm=step_cfg.algorithm if VARIANTS[variant].algorithm is None else VARIANTS[variant].algorithm,
            seed=seed,
            assignment=[int(x) for x in d.assignment],
            valid=bool(d.valid),
            throughput=float(d.throughput),
            cost=float(d.cost),
            knee_index=d.index,
            knee_distance=None if d.knee_distance is None else float(d.knee_distance),
            front_size=d.front_size,
            valid_fraction=float(result.valid_fraction),
            evaluations=result.evaluations,
            filtered=d.filtered,
            repaired=d.repaired,
            operator_stats=result.operator_stats.as_dict(),
        ))
    return SimulationLog(records, timings)
