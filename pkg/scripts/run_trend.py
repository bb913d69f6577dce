"""Runtime simulation over several seeds, scored with modified HV/ED.

For each seed every variant adapts over the same trace; the per-seed HV and
ED are then compared against a baseline variant with a paired Wilcoxon test.
"""

import argparse
from dataclasses import dataclass

import numpy as np

from featuremoea.experiment import FEMOSAA, FEMOSAA_N, VARIANTS, Setup, simulate
from featuremoea.metrics import summarize, wilcoxon_signed_rank
from featuremoea.moea import ALGORITHMS, RunConfig
from featuremoea.sas_bench import EnvTrace, default_rsd_series


@dataclass
class TrendConfig:
    seeds: int = 30
    timesteps: int = 20
    pop_size: int = 100
    generations: int = 10
    algorithm: str = "nsga2"
    variants: tuple[str, ...] = (FEMOSAA, FEMOSAA_N)


def main(cfg: TrendConfig) -> None:
    setup = Setup.default()
    trace = EnvTrace(seed=0, target_rsd=default_rsd_series(cfg.timesteps))
    run_cfg = RunConfig(pop_size=cfg.pop_size, generations=cfg.generations, algorithm=cfg.algorithm)
    hv = {v: [] for v in cfg.variants}
    ed = {v: [] for v in cfg.variants}
    for seed in range(cfg.seeds):
        logs = {v: simulate(setup, v, run_cfg, trace, seed=seed).records for v in cfg.variants}
        for s in summarize({v: [[r.throughput for r in L], [r.cost for r in L]] for v, L in logs.items()},
                           ["max", "min"]):
            hv[s.name].append(s.hv)
            ed[s.name].append(s.ed)
    base = cfg.variants[0]
    for v in cfg.variants:
        line = f"{v:12s} HV {np.mean(hv[v]):.3f}  ED {np.mean(ed[v]):.3f}"
        if v != base:
            line += (f"  HV {base} >= in {sum(a >= b for a, b in zip(hv[base], hv[v]))}/{cfg.seeds}"
                     f"  p={wilcoxon_signed_rank(hv[base], hv[v]).p_value:.3g}")
        print(line)


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=TrendConfig.seeds)
    p.add_argument("--timesteps", type=int, default=TrendConfig.timesteps)
    p.add_argument("--pop", type=int, default=TrendConfig.pop_size)
    p.add_argument("--gens", type=int, default=TrendConfig.generations)
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS), default=TrendConfig.algorithm)
    p.add_argument("--variant", action="append", choices=sorted(VARIANTS),
                   help="repeatable; the first is the baseline")
    a = p.parse_args()
    main(TrendConfig(a.seeds, a.timesteps, a.pop, a.gens, a.algorithm, tuple(a.variant or TrendConfig.variants)))
