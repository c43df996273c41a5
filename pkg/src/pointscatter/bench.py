"""Timing harness comparing batched greedy matching with per-region Hungarian."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .convert import region_targets
from .core_types import make_grid
from .matching import batched_greedy_array, hungarian_match, pairwise_costs
from .synth import SynthParams, draw_tubes


@dataclass(frozen=True)
class BenchLayout:
    """Parameters of the random tubular GT layouts the cost matrices come from."""

    branches_per_48px: float = 3.0
    width_range: tuple[int, int] = (1, 3)
    offset_spread: float = 2.0  # predicted points: region center + U(-spread, spread)


def cost_batch(image_size: int, downsample: int, n: int, batch: int, seed: int,
               layout: BenchLayout = BenchLayout()):
    """Cost matrices of every non-empty region of ``batch`` random images.

    Returns ``(costs (B, K_max, N), counts (B,), total_regions)``.
    """
    rng = np.random.default_rng(seed)
    grid = make_grid(image_size, image_size, downsample)
    n_branches = max(1, round(layout.branches_per_48px * (image_size / 48) ** 2 / 8))
    params = SynthParams(height=image_size, width=image_size, n_branches=n_branches,
                         width_range=layout.width_range, downsample=downsample)
    gts, counts = [], []
    for _ in range(batch):
        pts, k = region_targets(draw_tubes(rng, params), grid)
        gts.append(pts)
        counts.append(k)
    gts = np.concatenate(gts)
    counts = np.concatenate(counts)
    live = counts > 0
    gts, counts = gts[live], counts[live]
    k_max = int(counts.max(initial=0))
    centers = np.tile(grid.centers(), (batch, 1))[live]
    points = centers[:, None, :] + rng.uniform(-layout.offset_spread, layout.offset_spread,
                                               size=(len(counts), n, 2))
    scores = rng.uniform(0.0, 1.0, size=(len(counts), n))
    costs = pairwise_costs(gts[:, :k_max], points, scores, 0.8)
    return costs, counts, grid.num_regions * batch


def run_greedy(costs, counts):
    t0 = time.perf_counter()
    sigma = batched_greedy_array(costs, counts)
    elapsed = time.perf_counter() - t0
    rows = np.arange(sigma.shape[1])[None, :] < counts[:, None]
    b, i = np.nonzero(rows)
    total = math.fsum(costs[b, i, sigma[b, i]].tolist())
    return elapsed, total


def run_hungarian(costs, counts):
    t0 = time.perf_counter()
    total_parts = []
    for b in range(len(counts)):
        k = int(counts[b])
        res = hungarian_match(costs[b, :k])
        total_parts.append(res.total_cost(costs[b, :k]))
    elapsed = time.perf_counter() - t0
    return elapsed, math.fsum(total_parts)


def benchmark(image_sizes, downsample: int = 4, n: int = 16, batch: int = 4, repeats: int = 1,
              seed: int = 0, layout: BenchLayout = BenchLayout()) -> list[dict]:
    """One row per (size, method); ``seconds`` is the fastest of ``repeats`` runs."""
    rows = []
    for size in image_sizes:
        costs, counts, total_regions = cost_batch(size, downsample, n, batch, seed, layout)
        g_times, h_times = [], []
        for _ in range(repeats):
            t, g_total = run_greedy(costs, counts)
            g_times.append(t)
            t, h_total = run_hungarian(costs, counts)
            h_times.append(t)
        g, h = min(g_times), min(h_times)
        gap = (g_total - h_total) / h_total if h_total > 0 else 0.0
        common = {"image_size": size, "regions": total_regions, "nonempty_regions": len(counts)}
        rows.append({**common, "method": "greedy", "seconds": g, "speedup": h / g if g > 0 else math.inf,
                     "total_cost": g_total, "optimality_gap": gap})
        rows.append({**common, "method": "hungarian", "seconds": h, "speedup": 1.0,
                     "total_cost": h_total, "optimality_gap": 0.0})
    return rows
