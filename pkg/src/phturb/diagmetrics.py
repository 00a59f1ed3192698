"""Wasserstein and bottleneck distances between persistence diagrams.

The diagonal is handled by the usual finite augmentation: every
off-diagonal point may instead be matched to its nearest diagonal point
``((b+d)/2, (b+d)/2)``, at sup-norm cost ``(d-b)/2``, and leftover diagonal
slots match each other for free. Infinite pairs are matched among
themselves by birth order.
"""

import math
import warnings

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ._validation import check_positive_int
from .exceptions import DimensionMismatch, IncomparableEssentials

__all__ = ["matching_problem", "wasserstein", "bottleneck"]


def _split(dgm):
    pts = dgm.points if hasattr(dgm, "points") else np.asarray(dgm, dtype=float).reshape(-1, 2)
    inf = np.isinf(pts[:, 1])
    return pts[~inf], np.sort(pts[inf, 0])


def _check_dims(p1, p2):
    d1, d2 = getattr(p1, "dim", None), getattr(p2, "dim", None)
    if d1 is not None and d2 is not None and d1 != d2:
        raise DimensionMismatch(f"cannot compare H{d1} with H{d2}")


def matching_problem(a, b):
    """Square sup-norm cost matrix of the augmented matching problem.

    Rows are ``a``'s points then one diagonal slot per point of ``b``;
    columns are ``b``'s points then one diagonal slot per point of ``a``.
    Forbidden pairings (a point against a foreign diagonal slot) cost +inf.
    """
    m, n = len(a), len(b)
    cost = np.full((m + n, m + n), np.inf)
    if m and n:
        cost[:m, :n] = np.maximum(np.abs(a[:, None, 0] - b[None, :, 0]),
                                  np.abs(a[:, None, 1] - b[None, :, 1]))
    idx_a, idx_b = np.arange(m), np.arange(n)
    cost[idx_a, n + idx_a] = (a[:, 1] - a[:, 0]) / 2.0
    cost[m + idx_b, idx_b] = (b[:, 1] - b[:, 0]) / 2.0
    cost[m:, n:] = 0.0
    return cost


def _essential_costs(e1, e2):
    if len(e1) != len(e2):
        warnings.warn(
            f"diagrams have {len(e1)} and {len(e2)} infinite pairs; distance is +inf",
            IncomparableEssentials,
            stacklevel=3,
        )
        return None
    return np.abs(e1 - e2)


def wasserstein(p1, p2, p: int = 1) -> float:
    """Degree-``p`` Wasserstein distance with sup-norm ground metric.

    Solved exactly as a linear assignment problem. Returns ``inf`` (with an
    :class:`IncomparableEssentials` warning) when the diagrams hold different
    numbers of infinite pairs.
    """
    p = check_positive_int(p, "p")
    _check_dims(p1, p2)
    a, e1 = _split(p1)
    b, e2 = _split(p2)
    ess = _essential_costs(e1, e2)
    if ess is None:
        return math.inf
    costs = list(ess)
    if len(a) or len(b):
        cost = matching_problem(a, b)
        finite = np.isfinite(cost)
        powered = np.where(finite, cost, 0.0) ** p
        big = powered.sum() + 1.0
        rows, cols = linear_sum_assignment(np.where(finite, powered, big))
        costs.extend(cost[rows, cols])
    return math.fsum(c**p for c in costs) ** (1.0 / p)


def bottleneck(p1, p2) -> float:
    """Bottleneck distance: smallest achievable largest matched cost.

    Binary search over the distinct candidate costs, testing each threshold
    for a perfect matching.
    """
    _check_dims(p1, p2)
    a, e1 = _split(p1)
    b, e2 = _split(p2)
    ess = _essential_costs(e1, e2)
    if ess is None:
        return math.inf
    floor = float(ess.max()) if len(ess) else 0.0
    if not (len(a) or len(b)):
        return floor
    cost = matching_problem(a, b)
    size = cost.shape[0]
    candidates = np.unique(cost[np.isfinite(cost)])

    def feasible(t):
        graph = csr_matrix((cost <= t).astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        return bool(np.all(match >= 0)) and len(match) == size

    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return max(floor, float(candidates[lo]))
