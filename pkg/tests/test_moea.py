import itertools
import math

import numpy as np
import pytest

from featuremoea.dependency import transpose
from featuremoea.experiment import SoaEvaluator
from featuremoea.models import build_mini_cache
from featuremoea.moea import (
    IBEA,
    MOEAD_STM,
    NSGA2,
    ObjectiveProblem,
    RunConfig,
    Solution,
    crowding_distance,
    dominates,
    get_nondominated,
    ibea_step,
    nondominated_sort,
    run,
    stable_matching,
    tchebycheff,
)
from featuremoea.moea.ibea import fitness
from featuremoea.moea.moead_stm import is_stable, neighborhoods, preferences, simplex_lattice


def sols(points):
    return [Solution((i,), tuple(map(float, p))) for i, p in enumerate(points)]


def brute_front(points):
    def dom(a, b):
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

    return {i for i, p in enumerate(points) if not any(dom(q, p) for q in points)}


# --- dominance and sorting --------------------------------------------------


def test_three_point_sort():
    fronts = nondominated_sort(sols([(1, 2), (2, 1), (3, 3)]))
    assert [[s.objectives for s in f] for f in fronts] == [[(1, 2), (2, 1)], [(3, 3)]]


def test_identical_points_share_rank_zero():
    fronts = nondominated_sort(sols([(1, 1)] * 4))
    assert len(fronts) == 1 and len(fronts[0]) == 4


def test_singleton_front():
    assert get_nondominated(sols([(5, 5)]))[0].objectives == (5.0, 5.0)


def test_dominates_is_strict():
    assert dominates((1, 1), (1, 2)) and not dominates((1, 1), (1, 1)) and not dominates((0, 2), (1, 1))


def test_ranks_satisfy_definition():
    rng = np.random.default_rng(0)
    for _ in range(30):
        pts = [tuple(x) for x in rng.integers(0, 6, size=(rng.integers(1, 40), 2))]
        fronts = nondominated_sort(sols(pts))
        rank = {s.assignment[0]: r for r, f in enumerate(fronts) for s in f}
        assert sorted(rank) == list(range(len(pts)))
        for i, p in enumerate(pts):
            dominators = [rank[j] for j, q in enumerate(pts) if dominates(q, p)]
            assert all(r < rank[i] for r in dominators)
            if rank[i] > 0:
                assert rank[i] - 1 in dominators


def test_nondominated_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pts = [tuple(x) for x in rng.random((rng.integers(1, 60), 2)).round(1)]
        got = {s.assignment[0] for s in get_nondominated(sols(pts))}
        assert got == brute_front(pts)


# --- crowding -----------------------------------------------------------------


def test_crowding_two_points_infinite():
    assert crowding_distance(sols([(0, 1), (1, 0)])) == [math.inf, math.inf]


def test_crowding_collinear_middle():
    d = crowding_distance(sols([(0, 2), (1, 1), (2, 0)]))
    assert d[0] == d[2] == math.inf
    assert d[1] == pytest.approx(1.0 + 1.0)


def test_crowding_degenerate_axis():
    d = crowding_distance(sols([(0, 5), (1, 5), (3, 5)]))
    assert d[1] == pytest.approx((3 - 0) / 3)


def test_crowding_empty_front():
    with pytest.raises(ValueError):
        crowding_distance([])


# --- IBEA -----------------------------------------------------------------------


def ibea_reference(points, size, kappa=0.05):
    """Loop-by-loop additive-epsilon IBEA environmental selection."""
    pts = [list(p) for p in points]
    m = len(pts[0])
    lo = [min(p[k] for p in pts) for k in range(m)]
    hi = [max(p[k] for p in pts) for k in range(m)]
    norm = [[(p[k] - lo[k]) / ((hi[k] - lo[k]) or 1.0) for k in range(m)] for p in pts]
    n = len(pts)
    ind = [[max(norm[a][k] - norm[b][k] for k in range(m)) for b in range(n)] for a in range(n)]
    c = max(abs(x) for row in ind for x in row) or 1.0
    alive = list(range(n))
    fit = {x: sum(-math.exp(-ind[y][x] / (c * kappa)) for y in alive if y != x) for x in alive}
    while len(alive) > size:
        worst = min(alive, key=lambda x: (fit[x], x))
        alive.remove(worst)
        for x in alive:
            fit[x] += math.exp(-ind[worst][x] / (c * kappa))
    return alive


def test_ibea_dominating_point_fitter():
    fit, _, _ = fitness(np.array([[0.0, 0.0], [1.0, 1.0]]), 0.05)
    assert fit[0] > fit[1]


def test_ibea_single_survives():
    assert ibea_step(sols([(3, 4)]), [], 1)[0].objectives == (3.0, 4.0)


def test_ibea_four_points():
    pts = [(0.0, 1.0), (1.0, 0.0), (0.5, 0.5), (0.9, 0.9)]
    kept = [s.assignment[0] for s in ibea_step(sols(pts), [], 3)]
    assert kept == [0, 1, 2]  # the dominated corner goes first
    for size in (1, 2, 3):
        assert [s.assignment[0] for s in ibea_step(sols(pts), [], size)] == ibea_reference(pts, size)


def test_ibea_matches_reference_on_random_sets():
    rng = np.random.default_rng(2)
    for _ in range(30):
        pts = [tuple(x) for x in rng.random((8, 2))]
        size = int(rng.integers(1, 8))
        assert [s.assignment[0] for s in ibea_step(sols(pts), [], size)] == ibea_reference(pts, size)


# --- MOEA/D-STM -----------------------------------------------------------------


def test_tchebycheff_examples():
    assert tchebycheff((1, 2), (0.5, 0.5), (1, 2)) == 0
    assert tchebycheff((2, 5), (1, 0), (0, 0)) == pytest.approx(2, abs=1e-5)
    assert tchebycheff((2, 5), (0.5, 0.5), (0, 0)) == 2.5
    with pytest.raises(ValueError):
        tchebycheff((1, 2), (1,), (0, 0))


def test_weight_one_zero_ranks_by_first_objective():
    F = np.array([[3.0, 0.0], [1.0, 9.0], [2.0, 5.0]])
    sub_pref, _ = preferences(F, np.array([[1.0, 0.0]]), F.min(axis=0), F.max(axis=0))
    assert list(sub_pref[0]) == [1, 2, 0]


def test_unanimous_two_by_two():
    sub = np.array([[0, 1], [0, 1]])
    sol = np.array([[1, 0], [1, 0]])
    assert stable_matching(sub, sol) == [1, 0]


def _stable_by_enumeration(sub, sol):
    n = len(sub)
    out = []
    for perm in itertools.permutations(range(n)):
        blocking = False
        for p, s in itertools.product(range(n), range(n)):
            q = perm.index(s)  # subproblem currently holding s
            if list(sub[p]).index(s) < list(sub[p]).index(perm[p]) and list(sol[s]).index(p) < list(sol[s]).index(q):
                blocking = True
        if not blocking:
            out.append(list(perm))
    return out


def test_three_by_three_unique_stable_matching():
    sub = np.array([[0, 1, 2], [0, 2, 1], [1, 0, 2]])
    sol = np.array([[1, 0, 2], [2, 0, 1], [0, 1, 2]])
    stable = _stable_by_enumeration(sub, sol)
    assert len(stable) == 1
    assert stable_matching(sub, sol) == stable[0]


def test_matching_is_stable_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        sub = np.array([rng.permutation(n) for _ in range(n)])
        sol = np.array([rng.permutation(n) for _ in range(n)])
        match = stable_matching(sub, sol)
        assert sorted(match) == list(range(n))
        assert is_stable(match, sub, sol)
        assert match in _stable_by_enumeration(sub, sol)


def test_simplex_lattice_and_neighbourhood():
    W = simplex_lattice(5)
    assert np.allclose(W.sum(axis=1), 1) and W.shape == (5, 2)
    assert list(neighborhoods(W, 3)[0]) == [0, 1, 2]
    assert simplex_lattice(6, 3).shape == (6, 3)


# --- run loop -------------------------------------------------------------------


def mini_problem():
    table = {0: (1.0, 1.0), 1: (0.0, 2.0), 2: (2.0, 2.0)}
    return ObjectiveProblem(lambda a: table[a[0]], ("min", "min"))


@pytest.mark.parametrize("algo", [NSGA2, IBEA, MOEAD_STM])
def test_single_gene_front_is_exhaustive_pareto_set(algo):
    t = transpose(build_mini_cache())
    r = run(mini_problem(), t.spec, t.trees, t.chains, RunConfig(pop_size=10, generations=5, algorithm=algo))
    assert {s.assignment for s in r.front} == {(0,), (1,)}


def test_zero_generations_is_initial_front():
    t = transpose(build_mini_cache())
    r = run(mini_problem(), t.spec, t.trees, t.chains, RunConfig(pop_size=6, generations=0))
    assert r.evaluations == 6 and len(r.log) == 1
    assert r.front == get_nondominated(r.population)


@pytest.mark.parametrize("algo", [NSGA2, IBEA, MOEAD_STM])
def test_soa_run_budget_and_validity(soa_setup, algo):
    ev = SoaEvaluator(soa_setup.system, "elitist", transposed=soa_setup.transposed)
    p = ev.problem()
    t = soa_setup.transposed
    r = run(p, t.spec, t.trees, t.chains, RunConfig(pop_size=20, generations=4, algorithm=algo, seed=7))
    assert r.evaluations == 80
    assert r.valid_evaluations == r.evaluations
    assert r.valid_fraction == 1.0
    for a, b in itertools.combinations(r.front, 2):
        assert not dominates(a.objectives, b.objectives) and not dominates(b.objectives, a.objectives)


def test_runs_are_deterministic(soa_setup):
    t = soa_setup.transposed

    def once():
        p = SoaEvaluator(soa_setup.system, "elitist", transposed=t).problem()
        r = run(p, t.spec, t.trees, t.chains, RunConfig(pop_size=16, generations=3, seed=11))
        return [(s.assignment, s.objectives) for s in r.front], r.log

    assert once() == once()


def test_run_config_validation():
    for bad in (dict(pop_size=1), dict(generations=-1), dict(mutation_rate=1.5), dict(algorithm="x"),
                dict(operators="x")):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_evaluation_failure_has_context():
    t = transpose(build_mini_cache())

    def boom(a):
        raise ZeroDivisionError

    with pytest.raises(RuntimeError, match="objective evaluation failed"):
        run(ObjectiveProblem(boom, ("min",)), t.spec, t.trees, t.chains, RunConfig(pop_size=2, generations=1))
