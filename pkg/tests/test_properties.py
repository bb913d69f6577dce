"""Property-based checks across modules."""

import math

import numpy as np
from conftest import decoded_valid
from hypothesis import given, settings
from hypothesis import strategies as st

from featuremoea.dependency import transpose
from featuremoea.feature_model import enumerate_valid_configurations, is_valid_configuration
from featuremoea.knee import perpendicular_distance, select_knee
from featuremoea.metrics import geometric_mean, wilcoxon_signed_rank
from featuremoea.moea import Solution, get_nondominated, stable_matching, tchebycheff
from featuremoea.moea.moead_stm import is_stable
from featuremoea.operators import OperatorContext, check_validity, crossover, mutate, random_valid_assignment
from featuremoea.random_models import random_model
from featuremoea.transposition import decode_solution

seeds = st.integers(0, 10_000)
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
points = st.lists(st.tuples(finite, finite), min_size=1, max_size=40)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_variability_preserved(seed):
    m = random_model(seed)
    assert decoded_valid(transpose(m)) == set(enumerate_valid_configurations(m).configs)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0, 1), st.floats(0, 1))
def test_operator_closure(seed, rm, rc):
    m = random_model(seed, n_deps=3)
    t = transpose(m)
    ctx = OperatorContext(t.spec, t.trees, t.chains, np.random.default_rng(seed))
    a, b = random_valid_assignment(ctx), random_valid_assignment(ctx)
    for o in (mutate(a, rm, ctx), *crossover(a, b, rc, ctx)):
        assert check_validity(o, ctx)
        assert is_valid_configuration(m, decode_solution(t.spec, t.grown, o))


@given(points)
def test_front_members_are_not_dominated(pts):
    front = get_nondominated([Solution((i,), p) for i, p in enumerate(pts)])
    ids = {s.assignment[0] for s in front}
    for i, p in enumerate(pts):
        dominated = any(all(x <= y for x, y in zip(q, p)) and q != p for q in pts)
        assert (i in ids) == (not dominated)


@given(points, seeds)
def test_knee_is_member_and_maximal(pts, seed):
    front = get_nondominated([Solution((i,), p) for i, p in enumerate(pts)])
    r = select_knee(front, np.random.default_rng(seed))
    assert r.chosen in front
    if (r.a, r.b) != (0.0, 0.0):
        best = max(perpendicular_distance(s.objectives, r.a, r.b, r.c) for s in front)
        assert r.distance >= best - 1e-9 * max(1.0, abs(best))


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30))
def test_wilcoxon_p_in_unit_interval_and_symmetric(pairs):
    x, y = zip(*pairs)
    r = wilcoxon_signed_rank(x, y)
    assert 0.0 <= r.p_value <= 1.0
    assert math.isclose(r.p_value, wilcoxon_signed_rank(y, x).p_value, abs_tol=1e-12)


@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=50))
def test_geometric_mean_bounded(v):
    g = geometric_mean(v)
    assert min(v) * (1 - 1e-9) <= g <= max(v) * (1 + 1e-9)


@given(st.tuples(finite, finite), st.floats(0, 1), st.tuples(finite, finite))
def test_tchebycheff_nonnegative(obj, w, ideal):
    assert tchebycheff(obj, (w, 1 - w), ideal) >= 0
    assert tchebycheff(ideal, (w, 1 - w), ideal) == 0


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    st.lists(st.permutations(range(n)), min_size=n, max_size=n),
    st.lists(st.permutations(range(n)), min_size=n, max_size=n))))
def test_stable_matching_has_no_blocking_pair(prefs):
    sub, sol = (np.array(p) for p in prefs)
    match = stable_matching(sub, sol)
    assert sorted(match) == list(range(len(sub)))
    assert is_stable(match, sub, sol)
