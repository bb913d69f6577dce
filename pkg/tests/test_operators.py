import itertools

import numpy as np
import pytest

from featuremoea.dependency import transpose
from featuremoea.feature_model import is_valid_configuration
from featuremoea.models import build_mini_cache
from featuremoea.operators import (
    DEPENDENCY_AWARE,
    PLAIN,
    OperatorContext,
    check_validity,
    crossover,
    mutate,
    mutate_gene,
    random_valid_assignment,
    repair,
)
from featuremoea.random_models import random_model
from featuremoea.transposition import decode_solution

TC, CM, HEAP, DISK, MEM = 2, 3, 4, 5, 9


def ctx_for(t, seed=0, mode=DEPENDENCY_AWARE):
    return OperatorContext(t.spec, t.trees, t.chains, np.random.default_rng(seed), mode)


def cached_on(**kw):
    a = [0] * 10
    a[CM] = 1  # Zipped
    for k, v in kw.items():
        a[{"heap": HEAP, "disk": DISK, "tc": TC}[k]] = v
    return a


class MaskRng:
    """Stands in for the generator: ``random(n)`` picks exactly the given genes."""

    def __init__(self, genes):
        self.genes = set(genes)

    def random(self, n=None):
        return np.array([0.0 if g in self.genes else 1.0 for g in range(n)])


def test_cache_mode_off_forces_heap_to_zero(web_stack):
    hits = 0
    for seed in range(40):
        ctx = ctx_for(web_stack, seed)
        s = cached_on(heap=1)
        assert check_validity(s, ctx)
        assert mutate_gene(s, CM, ctx)
        assert check_validity(s, ctx)
        if s[CM] == 0:
            hits += 1
            assert s[HEAP] == 0 and s[DISK] == 0
            assert ctx.stats.repairs >= 1
    assert hits > 0


def test_disk_swap_drags_heap_along(web_stack):
    p1, p2 = cached_on(heap=1), cached_on(disk=1)
    ctx = ctx_for(web_stack)
    assert check_validity(p1, ctx) and check_validity(p2, ctx)
    ctx.rng = MaskRng([DISK])
    c1, c2 = crossover(p1, p2, 0.5, ctx)
    assert c1[DISK] == 1 and c1[HEAP] == 0
    assert c2[DISK] == 0 and c2[HEAP] == 1
    assert check_validity(c1, ctx) and check_validity(c2, ctx)


def test_plain_swap_of_disk_alone_breaks(web_stack):
    ctx = ctx_for(web_stack, mode=PLAIN)
    ctx.rng = MaskRng([DISK])
    c1, c2 = crossover(cached_on(heap=1), cached_on(disk=1), 0.5, ctx)
    assert not check_validity(c2, ctx)


def test_zipped_with_compression_is_invalid(web_stack):
    ctx = ctx_for(web_stack)
    assert check_validity(cached_on(heap=1), ctx)
    assert not check_validity(cached_on(heap=1, tc=1), ctx)


def test_rate_zero_is_identity(web_stack):
    ctx = ctx_for(web_stack)
    a, b = cached_on(heap=1), cached_on(disk=1)
    assert mutate(a, 0.0, ctx) == tuple(a)
    assert crossover(a, b, 0.0, ctx) == (tuple(a), tuple(b))


def test_identical_parents_full_rate(web_stack):
    ctx = ctx_for(web_stack)
    a = cached_on(heap=3)
    assert crossover(a, a, 1.0, ctx) == (tuple(a), tuple(a))


def test_dependency_free_model_full_rate():
    t = transpose(build_mini_cache())
    ctx = ctx_for(t)
    seen = {mutate((0,), 1.0, ctx) for _ in range(100)}
    assert seen == {(0,), (1,), (2,)}


def test_plain_equals_aware_without_dependencies():
    t = transpose(build_mini_cache())
    for seed in range(20):
        a = ctx_for(t, seed, DEPENDENCY_AWARE)
        p = ctx_for(t, seed, PLAIN)
        assert [mutate((0,), 0.7, a) for _ in range(10)] == [mutate((0,), 0.7, p) for _ in range(10)]


def test_check_validity_agrees_with_oracle():
    for seed in range(30):
        m = random_model(seed, n_deps=2)
        t = transpose(m)
        ctx = ctx_for(t)
        for a in itertools.product(*[range(n) for n in t.spec.sizes]):
            assert check_validity(a, ctx) == is_valid_configuration(m, decode_solution(t.spec, t.grown, a))


def test_operator_closure_fuzz():
    for seed in range(15):
        m = random_model(seed + 500, n_deps=3, max_features=14)
        t = transpose(m)
        ctx = ctx_for(t, seed)
        rng = np.random.default_rng(seed)
        pool = [random_valid_assignment(ctx) for _ in range(10)]
        for i in range(60):
            a, b = pool[rng.integers(len(pool))], pool[rng.integers(len(pool))]
            outs = [mutate(a, rng.random(), ctx)] if i % 2 else list(crossover(a, b, rng.random(), ctx))
            for o in outs:
                assert check_validity(o, ctx)
                assert is_valid_configuration(m, decode_solution(t.spec, t.grown, o))
            pool.extend(outs)


def test_repair_fixes_plain_output(web_stack):
    ctx = ctx_for(web_stack, 3)
    bad = cached_on(heap=0, disk=0)
    assert not check_validity(bad, ctx)
    fixed = repair(bad, ctx)
    assert fixed is not None and check_validity(fixed, ctx)


def test_unknown_mode_rejected(web_stack):
    with pytest.raises(ValueError):
        ctx_for(web_stack, mode="psychic")


def test_operators_are_seeded(web_stack):
    def trail(seed):
        ctx = ctx_for(web_stack, seed)
        a, b = random_valid_assignment(ctx), random_valid_assignment(ctx)
        return [mutate(a, 0.5, ctx), *crossover(a, b, 0.9, ctx)]

    assert trail(5) == trail(5)
