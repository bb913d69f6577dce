"""Multi-objective evolutionary engine hosting NSGA-II, IBEA and MOEA/D-STM."""

from .core import (
    ALGORITHMS,
    IBEA,
    MOEAD_STM,
    NSGA2,
    GenerationRecord,
    ObjectiveProblem,
    RunConfig,
    RunResult,
    Solution,
    crowding_distance,
    dominates,
    get_nondominated,
    nondominated_sort,
    run,
)
from .ibea import ibea_step
from .moead_stm import moead_stm_step, stable_matching, tchebycheff

__all__ = [
    "ALGORITHMS",
    "IBEA",
    "MOEAD_STM",
    "NSGA2",
    "GenerationRecord",
    "ObjectiveProblem",
    "RunConfig",
    "RunResult",
    "Solution",
    "crowding_distance",
    "dominates",
    "get_nondominated",
    "ibea_step",
    "moead_stm_step",
    "nondominated_sort",
    "run",
    "stable_matching",
    "tchebycheff",
]
