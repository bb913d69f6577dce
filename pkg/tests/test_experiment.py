import json

import numpy as np
import pytest

from featuremoea.experiment import (
    DUSE,
    FEMOSAA,
    FEMOSAA_01,
    FEMOSAA_D,
    FEMOSAA_K,
    FEMOSAA_N,
    PLATO,
    PROFILES,
    VARIANTS,
    SoaEvaluator,
    aggregate_fitness,
    binary_encoding,
    optimize,
    records_from_jsonl,
    simulate,
)
from featuremoea.feature_model import XOR, is_valid_configuration
from featuremoea.moea import IBEA, NSGA2, RunConfig
from featuremoea.sas_bench import EnvTrace, default_rsd_series

SMALL = RunConfig(pop_size=30, generations=4)


def test_profiles():
    assert PROFILES["paper"].pop_size == 100 and PROFILES["paper"].generations == 10
    assert PROFILES["paper"].timesteps == 102
    assert (PROFILES["ci"].pop_size, PROFILES["ci"].generations, PROFILES["ci"].timesteps) == (40, 5, 20)


def test_variant_table():
    assert VARIANTS[FEMOSAA_K].filter_invalid and VARIANTS[FEMOSAA_K].repair_if_none
    assert VARIANTS[FEMOSAA_D].pick == "random" and VARIANTS[FEMOSAA_D].operators == "dependency_aware"
    assert VARIANTS[FEMOSAA_N].operators == "plain" and VARIANTS[FEMOSAA_N].pick == "random"
    assert VARIANTS[FEMOSAA_01].encoding == "binary"
    assert VARIANTS[DUSE].algorithm == NSGA2


def test_femosaa_picks_valid_knee(soa_setup):
    r, d = optimize(soa_setup, soa_setup.system, FEMOSAA, SMALL, 0)
    assert r.valid_fraction == 1.0 and d.valid
    assert d.knee_distance is not None and 0 <= d.index < d.front_size
    assert d.filtered == 0 and not d.repaired


def test_femosaa_d_records_random_index(soa_setup):
    picks = {optimize(soa_setup, soa_setup.system, FEMOSAA_D, SMALL, s)[1].index for s in range(8)}
    assert len(picks) > 1
    a = optimize(soa_setup, soa_setup.system, FEMOSAA_D, SMALL, 3)[1]
    b = optimize(soa_setup, soa_setup.system, FEMOSAA_D, SMALL, 3)[1]
    assert a == b and a.knee_distance is None


@pytest.mark.parametrize("variant", [FEMOSAA_K, FEMOSAA_N])
def test_plain_variants_filter_then_repair(soa_setup, variant):
    r, d = optimize(soa_setup, soa_setup.system, variant, SMALL, 0)
    n_invalid = sum(not s.valid for s in r.population)
    assert d.filtered == n_invalid
    if n_invalid == len(r.population):
        assert d.repaired and d.valid
    else:
        assert not d.repaired and d.valid


def test_binary_variant(soa_setup):
    r, d = optimize(soa_setup, soa_setup.system, FEMOSAA_01, SMALL, 0)
    spec = soa_setup.binary[0]
    assert len(spec.genes) == len(soa_setup.model.features) - 1
    assert len(d.assignment) == len(spec.genes)
    assert not d.repaired


def test_binary_xor_resolution_keeps_one_member(soa_setup):
    ev = SoaEvaluator(soa_setup.system, "binary", model=soa_setup.model, spec=soa_setup.binary[0])
    a = tuple([1] * len(ev.fids))
    cfg = ev._config(a)
    for g in soa_setup.model.groups.values():
        if g.kind == XOR and g.owner in cfg:
            assert sum(m in cfg for m in g.members) == 1
    ev2 = SoaEvaluator(soa_setup.system, "binary", model=soa_setup.model, spec=soa_setup.binary[0])
    assert ev2._config(a) == cfg
    assert np.array_equal(ev.instances(a), ev2.instances(a))
    assert ev.valid(a) == is_valid_configuration(soa_setup.model, cfg)


def test_binary_encoding_has_no_dependencies(soa_setup):
    spec, trees, chains = binary_encoding(soa_setup.model)
    assert all(t.level_order == () for t in trees.values())
    assert all(len(g.options) == 2 for g in spec.genes)


def test_plato_aggregate(soa_setup):
    F = np.array([[0.0, 10.0], [1.0, 0.0], [0.5, 5.0]])
    assert aggregate_fitness(F).tolist() == [0.5, 0.5, 0.5]
    r, d = optimize(soa_setup, soa_setup.system, PLATO, SMALL, 0)
    assert d.knee_distance is None and d.valid


def test_duse_forces_nsga2(soa_setup):
    cfg = RunConfig(pop_size=20, generations=2, algorithm=IBEA)
    r1, d1 = optimize(soa_setup, soa_setup.system, DUSE, cfg, 0)
    r2, d2 = optimize(soa_setup, soa_setup.system, FEMOSAA_N, RunConfig(pop_size=20, generations=2), 0)
    assert d1 == d2


def test_invalid_solutions_get_sentinels(soa_setup):
    ev = SoaEvaluator(soa_setup.system, "elitist", transposed=soa_setup.transposed)
    bad = next(tuple(np.random.default_rng(s).integers(0, 11, 18)) for s in range(100)
               if not ev.valid(tuple(np.random.default_rng(s).integers(0, 11, 18))))
    assert ev(bad) == (0.0, soa_setup.system.worst_cost)


def test_simulation_records_and_determinism(soa_setup):
    tr = EnvTrace(seed=1, target_rsd=default_rsd_series(3))
    log = simulate(soa_setup, FEMOSAA, SMALL, tr, seed=4)
    assert [r.timestep for r in log.records] == [0, 1, 2]
    assert all(r.valid and r.valid_fraction == 1.0 for r in log.records)
    again = simulate(soa_setup, FEMOSAA, SMALL, tr, seed=4)
    assert log.to_jsonl() == again.to_jsonl()
    assert "created" not in log.to_jsonl()
    assert set(log.metadata()) >= {"created", "run_seconds"}
    assert records_from_jsonl(log.to_jsonl()) == log.records


def test_one_timestep(soa_setup):
    log = simulate(soa_setup, FEMOSAA_N, SMALL, EnvTrace(seed=0), timesteps=1)
    assert len(log.records) == 1 and len(log.timings) == 1
    with pytest.raises(ValueError):
        simulate(soa_setup, FEMOSAA_N, SMALL, EnvTrace(seed=0), timesteps=0)


def test_operator_stats_logged(soa_setup):
    log = simulate(soa_setup, FEMOSAA, SMALL, EnvTrace(seed=0), timesteps=1)
    stats = json.loads(log.to_jsonl())["operator_stats"]
    assert stats["mutated_genes"] > 0 and "repairs" in stats
