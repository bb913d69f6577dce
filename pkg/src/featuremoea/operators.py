"""Boundary mutation and uniform crossover, with and without dependency awareness.

Dependency-aware mutation draws a gene's new value from its value tree under
the solution's current context, then re-draws every dependent the change
invalidated, recursively. When a dependent cannot be repaired the search
backtracks over the remaining candidate values; a gene is never re-entered
while it is still being assigned, which bounds the recursion by the gene count.

Dependency-aware crossover swaps the selected genes and then swaps violated
dependents (step 2) and the main genes of a still-violated gene (step 3),
each gene at most once per pair. If that leaves a violation, the affected
connected component of the dependency graph is taken whole from one parent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dependency import DependencyChains, ValueTree
from .transposition import ChromosomeSpec

DEPENDENCY_AWARE = "dependency_aware"
PLAIN = "plain"

_STEP_BUDGET = 20_000


@dataclass
class OperatorStats:
    mutated_genes: int = 0
    repairs: int = 0  # dependents found violated and re-drawn
    cascaded: int = 0  # gene values changed by repair
    backtracks: int = 0
    mutation_fallbacks: int = 0
    swaps: int = 0
    crossover_fallbacks: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class OperatorContext:
    spec: ChromosomeSpec
    trees: Mapping[int, ValueTree]
    chains: DependencyChains
    rng: np.random.Generator
    mode: str = DEPENDENCY_AWARE
    stats: OperatorStats = field(default_factory=OperatorStats)

    def __post_init__(self):
        if self.mode not in (DEPENDENCY_AWARE, PLAIN):
            raise ValueError(f"unknown operator mode {self.mode!r}")
        self._trees = [self.trees[g] for g in range(len(self.spec.genes))]
        self._leaf = [_compile_check(g, t, self.spec.sizes, leaf=True) for g, t in enumerate(self._trees)]
        self._ok = [_compile_check(g, t, self.spec.sizes) for g, t in enumerate(self._trees)]
        self._ok2 = [_compile_check(g, t, self.spec.sizes, pair=True) for g, t in enumerate(self._trees)]

    def gene_ok(self, s: Sequence[int], g: int) -> bool:
        return self._ok[g](s)


def _compile_check(g: int, tree: ValueTree, sizes: Sequence[int], pair: bool = False, leaf: bool = False):
    """A closure testing ``s[g] in tree.allowed(s)`` with the table lookup unrolled.

    With ``pair`` the closure takes two assignments and tests both; with
    ``leaf`` it returns the allowed values as a sorted list instead.
    """
    if not tree.level_order:
        full = tree.full
        if leaf:
            ordered = sorted(full)
            return lambda s: ordered
        return (lambda a, b: a[g] in full and b[g] in full) if pair else (lambda s: s[g] in full)
    levels, flat = tree._lookup
    if leaf:
        flat = [None if x is None else sorted(x) for x in flat]
    env = {"flat": flat}
    terms = []
    for k, (main, offsets, other) in enumerate(levels):
        env[f"o{k}"] = tuple(offsets) + (other,) * (sizes[main] - len(offsets))
        terms.append(f"o{k}[{{s}}[{main}]]")
    test = f"{{s}}[{g}] in flat[{' + '.join(terms)}]"
    if leaf:
        src = f"lambda s: flat[{' + '.join(terms)}]".format(s="s")
    elif pair:
        src = f"lambda a, b: {test.format(s='a')} and {test.format(s='b')}"
    else:
        src = f"lambda s: {test.format(s='s')}"
    return eval(src, env)  # noqa: S307 - generated from integers only


def check_validity(assignment: Sequence[int], ctx: OperatorContext) -> bool:
    return all(ok(assignment) for ok in ctx._ok)


def _draw(rng: np.random.Generator, n: int) -> int:
    """Uniform index in [0, n); a float draw is several times cheaper than ``integers``."""
    return min(int(rng.random() * n), n - 1)


def random_assignment(ctx: OperatorContext) -> tuple[int, ...]:
    r = ctx.rng.random(len(ctx.spec.sizes))
    return tuple(int(x * n) for x, n in zip(r, ctx.spec.sizes))


# ---------------------------------------------------------------------------
# mutation


class _Search:
    """Dependency-aware assignments on one solution, with undo log and step budget."""

    def __init__(self, s: list[int], ctx: OperatorContext):
        self.s = s
        self.ctx = ctx
        self.stats = ctx.stats
        self.rng = ctx.rng
        self.ok = ctx._ok
        self.leaf = ctx._leaf
        self.dependents = ctx.chains.dependents
        self.log: list[tuple[int, int]] = []
        self.steps = 0

    def undo(self, mark: int) -> None:
        while len(self.log) > mark:
            g, v = self.log.pop()
            self.s[g] = v

    def assign(self, g: int, stack: set) -> bool:
        s = self.s
        allowed = self.leaf[g](s)
        if not allowed:
            return False
        stack.add(g)
        try:
            return self._try_values(g, allowed, stack)
        finally:
            stack.discard(g)

    def _try_values(self, g: int, allowed: list, stack: set) -> bool:
        s, log = self.s, self.log
        first = _draw(self.rng, len(allowed))
        candidates = [allowed[first]]
        tried_rest = False
        i = 0
        while True:
            if i == len(candidates):
                rest = allowed[:first] + allowed[first + 1:]
                if tried_rest or not rest:
                    return False
                tried_rest = True
                candidates.extend(int(x) for x in self.rng.permutation(rest))
                self.stats.backtracks += 1
            v = candidates[i]
            i += 1
            self.steps += 1
            if self.steps > _STEP_BUDGET:
                return False
            mark = len(log)
            if s[g] != v:
                log.append((g, s[g]))
                s[g] = v
            if self.fix_dependents(g, stack):
                return True
            self.undo(mark)

    def fix_dependents(self, g: int, stack: set) -> bool:
        s, ok = self.s, self.ok
        for d in self.dependents[g]:
            if ok[d](s):
                continue
            if d in stack:
                return False
            self.stats.repairs += 1
            before = s[d]
            if not self.assign(d, stack):
                return False
            if s[d] != before:
                self.stats.cascaded += 1
        return True

    def mutate_gene(self, g: int) -> bool:
        """Re-draw gene ``g`` and repair its dependents; revert on failure."""
        mark = len(self.log)
        self.steps = 0
        if self.assign(g, set()):
            return True
        self.undo(mark)
        self.stats.mutation_fallbacks += 1
        return False


def mutate_gene(s: list[int], g: int, ctx: OperatorContext) -> bool:
    """Re-draw gene ``g`` of ``s`` in place and repair its dependents; revert on failure."""
    return _Search(s, ctx).mutate_gene(g)


def mutate(assignment: Sequence[int], rate: float, ctx: OperatorContext) -> tuple[int, ...]:
    n = len(assignment)
    picked = np.flatnonzero(ctx.rng.random(n) < rate)
    s = list(assignment)
    if ctx.mode == PLAIN:
        sizes = ctx.spec.sizes
        for g in picked:
            s[g] = _draw(ctx.rng, sizes[g])
        return tuple(s)
    if len(picked):
        ctx.stats.mutated_genes += len(picked)
        search = _Search(s, ctx)
        for g in picked.tolist():
            search.mutate_gene(g)
    return tuple(s)


def repair(assignment: Sequence[int], ctx: OperatorContext, attempts: int = 20) -> tuple[int, ...] | None:
    """Turn an arbitrary assignment into a valid one using dependency-aware mutation.

    Violated genes are re-drawn first; if that does not converge, every gene is
    mutated (rate 1) from the current point, then from fresh random points.
    Returns None when no valid assignment was found.
    """
    s = list(assignment)
    for _ in range(len(s) + 1):
        bad = [g for g in range(len(s)) if not ctx.gene_ok(s, g)]
        if not bad:
            return tuple(s)
        for g in bad:
            if not ctx.gene_ok(s, g):
                mutate_gene(s, g, ctx)
    start = tuple(s)
    for _ in range(attempts):
        cand = mutate(start, 1.0, ctx) if ctx.mode == DEPENDENCY_AWARE else start
        if check_validity(cand, ctx):
            return cand
        start = random_assignment(ctx)
    return None


def random_valid_assignment(ctx: OperatorContext, attempts: int = 100) -> tuple[int, ...]:
    """Random start mutated gene by gene at rate 1, as the initial population is built."""
    for _ in range(attempts):
        cand = mutate(random_assignment(ctx), 1.0, ctx)
        if check_validity(cand, ctx):
            return cand
        fixed = repair(cand, ctx, attempts=1)
        if fixed is not None:
            return fixed
    raise RuntimeError("no valid assignment found; is the model satisfiable?")


# ---------------------------------------------------------------------------
# crossover


def crossover(
    p1: Sequence[int], p2: Sequence[int], rate: float, ctx: OperatorContext
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    n = len(p1)
    picked = np.flatnonzero(ctx.rng.random(n) < rate)
    c1, c2 = list(p1), list(p2)
    if ctx.mode == PLAIN:
        for g in picked:
            c1[g], c2[g] = c2[g], c1[g]
        return tuple(c1), tuple(c2)
    swapped: set[int] = set()
    ok, dependents, mains = ctx._ok2, ctx.chains.dependents, ctx.chains.mains

    def swap(g: int) -> None:
        # callers skip genes already swapped
        swapped.add(g)
        c1[g], c2[g] = c2[g], c1[g]
        for d in dependents[g]:  # step 2
            if d not in swapped and not ok[d](c1, c2):
                swap(d)
        if mains[g] and not ok[g](c1, c2):  # step 3
            for mg in mains[g]:
                if mg not in swapped:
                    swap(mg)

    for g in picked.tolist():
        if g not in swapped:
            swap(g)
    ctx.stats.swaps += len(swapped)
    # parents are valid, so only swapped genes and their dependents can break
    touched = set(swapped)
    for g in swapped:
        touched.update(dependents[g])
    if all(ok[g](c1, c2) for g in touched):
        return tuple(c1), tuple(c2)
    # whole components from one parent each
    ctx.stats.crossover_fallbacks += 1
    done: set[int] = set()
    for g in range(n):
        if g in done or ok[g](c1, c2):
            continue
        comp = ctx.chains.component_of(g)
        done |= comp
        flip = g in swapped
        for x in comp:
            c1[x], c2[x] = (p2[x], p1[x]) if flip else (p1[x], p2[x])
    return tuple(c1), tuple(c2)
