"""Wall-clock time of one optimization run per variant and algorithm."""

import argparse
import time
from dataclasses import dataclass

import numpy as np

from featuremoea.experiment import VARIANTS, Setup, optimize
from featuremoea.moea import ALGORITHMS, RunConfig


@dataclass
class OverheadConfig:
    repeats: int = 10
    pop_size: int = 100
    generations: int = 10


def main(cfg: OverheadConfig) -> None:
    setup = Setup.default()
    print(f"{'variant':12s} " + " ".join(f"{a:>10s}" for a in ALGORITHMS))
    for v in VARIANTS:
        cells = []
        for algo in ALGORITHMS:
            optimize(setup, setup.system, v, RunConfig(algorithm=algo, seed=999), [0])  # warm-up
            ts = []
            for seed in range(cfg.repeats):
                rc = RunConfig(pop_size=cfg.pop_size, generations=cfg.generations, algorithm=algo, seed=seed)
                t0 = time.perf_counter()
                optimize(setup, setup.system, v, rc, [seed])
                ts.append(time.perf_counter() - t0)
            cells.append(f"{np.median(ts):9.3f}s")
        print(f"{v:12s} " + " ".join(cells))


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeats", type=int, default=OverheadConfig.repeats)
    p.add_argument("--pop", type=int, default=OverheadConfig.pop_size)
    p.add_argument("--gens", type=int, default=OverheadConfig.generations)
    a = p.parse_args()
    main(OverheadConfig(a.repeats, a.pop, a.gens))
