"""Quality metrics over per-timestep observations and paired significance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

GM_FLOOR = 1e-9
EFFECT_CUTOFFS = ((0.5, "large"), (0.3, "medium"), (0.1, "small"))
EXACT_MAX_N = 25


def geometric_mean(values: Sequence[float], floor: float = GM_FLOOR) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("geometric mean of an empty series")
    if np.any(v < 0):
        raise ValueError("geometric mean needs non-negative values")
    return float(np.exp(np.log(np.maximum(v, floor)).mean()))


def normalized_gms(gms: np.ndarray) -> np.ndarray:
    """Rows are approaches, columns minimized objectives; 0 = best observed, 1 = worst."""
    gms = np.asarray(gms, dtype=float)
    if gms.ndim != 2 or gms.shape[0] < 2:
        raise ValueError("need a (approaches x objectives) matrix with at least two approaches")
    best, worst = gms.min(axis=0), gms.max(axis=0)
    span = worst - best
    out = np.zeros_like(gms)
    ok = span > 0
    out[:, ok] = (gms[:, ok] - best[ok]) / span[ok]
    return out


def hv(gms: np.ndarray) -> np.ndarray:
    return np.prod(1.0 - normalized_gms(gms), axis=1)


def ed(gms: np.ndarray) -> np.ndarray:
    z = normalized_gms(gms)
    return np.sqrt((z ** 2).sum(axis=1)) / z.shape[1]


@dataclass(frozen=True)
class SeriesSummary:
    name: str
    gm: tuple[float, ...]  # per objective, minimized form
    hv: float
    ed: float
    valid_fraction: float


def summarize(series: Mapping[str, Sequence[Sequence[float]]], senses: Sequence[str],
              valid: Mapping[str, float] | None = None) -> list[SeriesSummary]:
    """``series[name]`` is a list of per-objective observation sequences.

    Maximized objectives are inverted (reciprocal of the GM) before normalization.
    """
    names = list(series)
    gms = []
    for n in names:
        row = []
        for k, obs in enumerate(series[n]):
            g = geometric_mean(obs)
            row.append(1.0 / g if senses[k] == "max" else g)
        gms.append(row)
    G = np.array(gms)
    H, E = hv(G), ed(G)
    valid = valid or {}
    return [SeriesSummary(n, tuple(G[i]), float(H[i]), float(E[i]), float(valid.get(n, float("nan"))))
            for i, n in enumerate(names)]


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    p_value: float
    statistic: float  # W+, sum of ranks of positive differences
    n: int  # non-zero differences
    z: float
    effect_size: float
    category: str
    method: str


def effect_category(r: float) -> str:
    for cut, name in EFFECT_CUTOFFS:
        if r >= cut:
            return name
    return "trivial"


def signed_ranks(d: np.ndarray) -> np.ndarray:
    """Average ranks of |d| (ties share the mean rank)."""
    a = np.abs(d)
    order = np.argsort(a, kind="stable")
    ranks = np.empty(len(a))
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def exact_p(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided p under the sign-flip null, counting sums on doubled (integer) ranks."""
    r2 = np.rint(2 * ranks).astype(int)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    probs = counts / 2.0 ** len(r2)
    w = int(round(2 * w_plus))
    lower = probs[: w + 1].sum()
    upper = probs[w:].sum()
    return float(min(1.0, 2 * min(lower, upper)))


def normal_z(ranks: np.ndarray, w_plus: float, tie_sizes: Sequence[int], continuity: bool = True) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t ** 3 - t for t in tie_sizes) / 48
    if var <= 0:
        return 0.0
    diff = w_plus - mean
    if continuity and diff != 0:
        diff -= math.copysign(min(0.5, abs(diff)), diff)
    return diff / math.sqrt(var)


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float], method: str = "auto") -> TestResult:
    """Two-tailed paired test. ``method``: "auto" (exact for n <= 25), "exact" or "approx"."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be paired 1-d series of equal length")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return TestResult(1.0, 0.0, 0, 0.0, 0.0, "trivial", "none")
    ranks = signed_ranks(d)
    w_plus = float(ranks[d > 0].sum())
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    z = normal_z(ranks, w_plus, tie_sizes)
    use_exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if use_exact:
        p = exact_p(ranks, w_plus)
    else:
        p = float(min(1.0, math.erfc(abs(z) / math.sqrt(2))))
    r = abs(z) / math.sqrt(n)
    return TestResult(p, w_plus, n, z, r, effect_category(r), "exact" if use_exact else "approx")


def valid_fraction(per_timestep: Sequence[float]) -> float:
    """Mean over timesteps of the valid share of the final population."""
    if len(per_timestep) == 0:
        raise ValueError("empty log")
    return float(np.mean(per_timestep))
