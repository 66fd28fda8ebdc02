"""MSE metric and the two-sample Wilcoxon rank-sum test.

The rank-sum p-value uses the tie-corrected normal approximation for large
samples and exact permutation enumeration when the group sizes are small
enough to enumerate (the normal approximation is off by far more than 0.05 in
absolute terms for tiny groups, no matter how it is continuity-corrected).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

ALPHA = 0.05
EXACT_ENUMERATION_LIMIT = 20_000  # max C(n+m, n) enumerated by method="auto"


def mse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("mse needs two 1-D sequences of equal length")
    if a.size == 0:
        raise ValueError("mse of empty sequences")
    return float(np.mean((a - b) ** 2))


def rankdata(values: np.ndarray) -> np.ndarray:
    """Midranks: ties share the mean of the ranks they occupy."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass
class RankSumResult:
    z: float
    p: float
    rank_sum_x: float
    rank_sum_y: float
    tie_corrected: bool
    method: str

    @property
    def significant(self) -> bool:
        return self.p < ALPHA

    def to_json(self) -> str:
        return json.dumps({"z": self.z, "p": self.p, "significant": self.significant})


def _moments(n: int, m: int, pooled_ranks: np.ndarray):
    N = n + m
    mu = n * (N + 1) / 2.0
    _, counts = np.unique(pooled_ranks, return_counts=True)
    tie_term = float(np.sum(counts.astype(float) ** 3 - counts))
    var = n * m / 12.0 * ((N + 1) - tie_term / (N * (N - 1)))
    return mu, var, tie_term > 0


def wilcoxon_rank_sum(x, y, method: str = "auto") -> RankSumResult:
    """Two-sided rank-sum test on samples x and y.

    The z statistic is always the (tie-corrected, uncorrected-for-continuity)
    normal deviate of x's rank sum, matching the usual large-sample report.
    method: "normal", "exact" (permutation of the pooled midranks), or "auto".
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([x, y])
    ranks = rankdata(pooled)
    w_x = float(ranks[:n].sum())
    w_y = float(ranks[n:].sum())
    mu, var, ties = _moments(n, m, ranks)
    z = 0.0 if var == 0 else (w_x - mu) / math.sqrt(var)
    if method == "auto":
        method = "exact" if math.comb(n + m, n) <= EXACT_ENUMERATION_LIMIT else "normal"
    if method == "normal":
        p = min(1.0, 2.0 * _normal_sf(abs(z)))
    elif method == "exact":
        p = _exact_two_sided_p(ranks, n, w_x, mu)
    else:
        raise ValueError(f"unknown method {method!r}")
    return RankSumResult(z=z, p=p, rank_sum_x=w_x, rank_sum_y=w_y,
                         tie_corrected=ties, method=method)


def _exact_two_sided_p(ranks: np.ndarray, n: int, w_obs: float, mu: float) -> float:
    """P(|W - mu| >= |w_obs - mu|) under random assignment of the pooled ranks."""
    dev = abs(w_obs - mu) - 1e-9
    hits = 0
    total = 0
    for combo in itertools.combinations(range(len(ranks)), n):
        w = ranks[list(combo)].sum()
        total += 1
        if abs(w - mu) >= dev:
            hits += 1
    return hits / total
