"""Share of valid solutions in the final population, per variant and seed.

    python3 scripts/run_ablation.py --seeds 30 --out results/ablation.csv
"""

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from featuremoea.experiment import VARIANTS, Setup, optimize
from featuremoea.moea import ALGORITHMS, RunConfig


@dataclass
class AblationConfig:
    seeds: int = 30
    pop_size: int = 100
    generations: int = 10
    algorithm: str = "nsga2"
    variants: tuple[str, ...] = tuple(VARIANTS)
    out: str = "results/ablation.csv"


def main(cfg: AblationConfig) -> None:
    setup = Setup.default()
    rows = []
    for v in cfg.variants:
        for seed in range(cfg.seeds):
            run_cfg = RunConfig(pop_size=cfg.pop_size, generations=cfg.generations,
                                algorithm=cfg.algorithm, seed=seed)
            result, d = optimize(setup, setup.system, v, run_cfg, [seed])
            rows.append(dict(variant=v, seed=seed, valid_fraction=result.valid_fraction,
                             chosen_valid=d.valid, repaired=d.repaired))
        vf = [r["valid_fraction"] for r in rows if r["variant"] == v]
        print(f"{v:12s} mean valid {np.mean(vf):.3f}  seeds below 1.0: {sum(x < 1 for x in vf)}/{cfg.seeds}")
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=AblationConfig.seeds)
    p.add_argument("--pop", type=int, default=AblationConfig.pop_size)
    p.add_argument("--gens", type=int, default=AblationConfig.generations)
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS), default=AblationConfig.algorithm)
    p.add_argument("--variant", action="append", choices=sorted(VARIANTS))
    p.add_argument("--out", default=AblationConfig.out)
    a = p.parse_args()
    main(AblationConfig(a.seeds, a.pop, a.gens, a.algorithm, tuple(a.variant or VARIANTS), a.out))
