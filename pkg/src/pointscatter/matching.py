"""Label assignment between ground-truth points and predicted point slots.

A cost matrix has one row per GT point (K) and one column per prediction
slot (N), with K <= N. Every matcher returns an injective row -> column
assignment; columns left over receive the "no point" class.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ParameterError

BRUTE_FORCE_LIMIT = 7


@dataclass(frozen=True)
class MatchResult:
    assignment: tuple[int, ...]
    unmatched_columns: frozenset[int]

    @classmethod
    def from_assignment(cls, assignment, n: int) -> "MatchResult":
        assignment = tuple(int(j) for j in assignment)
        return cls(assignment, frozenset(range(n)) - frozenset(assignment))

    def total_cost(self, c) -> float:
        c = np.asarray(c, dtype=np.float64)
        return math.fsum(float(c[i, j]) for i, j in enumerate(self.assignment))


def as_cost_matrix(c) -> np.ndarray:
    arr = np.asarray(c, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ParameterError(f"cost matrix must be 2-D, got shape {arr.shape}")
    k, n = arr.shape
    if k > n:
        raise CapacityError(f"more ground-truth points than prediction slots ({k} > {n})")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ParameterError("cost entries must be finite and non-negative")
    return arr


def match_cost(g, p, s: float, eta: float) -> float:
    """Cost of assigning prediction ``p`` (score ``s``) to GT point ``g``.

    ``L1(g, p) ** eta * |s - 1| ** (1 - eta)``, with ``0 ** 0 == 1``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    if not 0.0 <= s <= 1.0:
        raise ParameterError(f"score must lie in [0, 1], got {s}")
    dist = abs(g[0] - p[0]) + abs(g[1] - p[1])
    return dist ** eta * abs(s - 1.0) ** (1.0 - eta)


def cost_matrix(gts, preds, eta: float) -> np.ndarray:
    """K x N matrix of :func:`match_cost` values for scored predictions."""
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    g = np.asarray(gts, dtype=np.float64).reshape(-1, 2)
    p = np.asarray(preds, dtype=np.float64).reshape(-1, 3)
    if len(g) > len(p):
        raise CapacityError(f"{len(g)} ground-truth points exceed {len(p)} prediction slots")
    return pairwise_costs(g, p[:, :2], p[:, 2], eta)


def pairwise_costs(gts: np.ndarray, points: np.ndarray, scores: np.ndarray, eta: float) -> np.ndarray:
    """Broadcasting cost kernel.

    ``gts`` is ``(..., K, 2)``, ``points`` ``(..., N, 2)`` and ``scores``
    ``(..., N)``; returns ``(..., K, N)``.
    """
    dist = np.abs(gts[..., :, None, :] - points[..., None, :, :]).sum(axis=-1)
    cls = np.abs(scores - 1.0)[..., None, :]
    return dist ** eta * cls ** (1.0 - eta)


def greedy_match(c) -> MatchResult:
    """Row-by-row argmin over the columns not yet taken.

    Ties go to the smallest column index.
    """
    c = as_cost_matrix(c)
    k, n = c.shape
    taken = np.zeros(n, dtype=np.float64)
    sigma = []
    for i in range(k):
        j = int(np.argmin(c[i] + taken))
        sigma.append(j)
        taken[j] = np.inf
    return MatchResult.from_assignment(sigma, n)


def batched_greedy_array(costs: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Greedy matching of a stack of padded cost matrices at once.

    ``costs`` has shape ``(B, K_max, N)`` and ``counts[b]`` gives the number
    of real rows of matrix ``b``; rows at or beyond the count are padding
    and do not consume columns. Returns ``(B, K_max)`` column indices with
    ``-1`` in padding rows.
    """
    costs = np.asarray(costs, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    b, k_max, n = costs.shape
    if np.any(counts > k_max) or np.any(counts > n):
        raise CapacityError("region count exceeds padded rows or prediction slots")
    sigma = np.full((b, k_max), -1, dtype=np.int64)
    # regions with equal K are stepped together, so no step needs an active-row gather
    order = np.argsort(counts, kind="stable")
    bounds = np.flatnonzero(np.diff(counts[order])) + 1
    for group in np.split(order, bounds):
        k = int(counts[group[0]]) if len(group) else 0
        if k == 0:
            continue
        sub = costs[group, :k, :]
        m = len(group)
        rows = np.arange(m)
        taken = np.zeros((m, n), dtype=np.float64)
        out = np.empty((m, k), dtype=np.int64)
        for i in range(k):
            j = np.argmin(sub[:, i, :] + taken, axis=1)
            out[:, i] = j
            taken[rows, j] = np.inf
        sigma[group, :k] = out
    return sigma


def batched_greedy(costs) -> list[MatchResult]:
    """Greedy matching of many regions; identical to mapping :func:`greedy_match`."""
    mats = [as_cost_matrix(c) for c in costs]
    results: list[MatchResult | None] = [None] * len(mats)
    by_n: dict[int, list[int]] = {}
    for b, m in enumerate(mats):
        by_n.setdefault(m.shape[1], []).append(b)
    for n, members in by_n.items():
        counts = np.array([mats[b].shape[0] for b in members], dtype=np.int64)
        k_max = int(counts.max())
        stack = np.zeros((len(members), k_max, n))
        for slot, b in enumerate(members):
            stack[slot, :counts[slot]] = mats[b]
        sigma = batched_greedy_array(stack, counts)
        for slot, b in enumerate(members):
            results[b] = MatchResult.from_assignment(sigma[slot, :counts[slot]], n)
    return results


def hungarian_match(c) -> MatchResult:
    """Minimum-cost injective assignment of rows to columns.

    Shortest augmenting path with dual potentials, O(K^2 N). Plain Python
    lists: for the small matrices of a scatter region this beats per-step
    numpy dispatch.
    """
    c = as_cost_matrix(c)
    k, n = c.shape
    if k == 0:
        return MatchResult((), frozenset(range(n)))
    a = c.tolist()
    inf = math.inf
    u = [0.0] * (k + 1)
    v = [0.0] * (n + 1)
    owner = [0] * (n + 1)  # owner[j]: 1-based row matched to column j, 0 = free
    way = [0] * (n + 1)
    for i in range(1, k + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    sigma = [0] * k
    for j in range(1, n + 1):
        if owner[j]:
            sigma[owner[j] - 1] = j - 1
    return MatchResult.from_assignment(sigma, n)


def brute_force_match(c) -> MatchResult:
    """Exhaustive search over all injections; lexicographically first minimiser wins."""
    c = as_cost_matrix(c)
    k, n = c.shape
    if k > BRUTE_FORCE_LIMIT or n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"brute force limited to {BRUTE_FORCE_LIMIT}x{BRUTE_FORCE_LIMIT}, got {k}x{n}")
    a = c.tolist()
    best, best_cost = (), math.inf
    for perm in itertools.permutations(range(n), k):
        total = math.fsum(a[i][j] for i, j in enumerate(perm))
        if total < best_cost:
            best, best_cost = perm, total
    return MatchResult.from_assignment(best, n)
