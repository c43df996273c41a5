"""Conversions between masks, point sets and score maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core_types import Point, RegionGrid, RegionIndex, ScoredPoint, as_mask, as_score_map, region_of
from .errors import DimensionError, ParameterError


@dataclass
class RegionPointSets:
    """Points grouped by the scatter region that contains them."""

    grid: RegionGrid
    per_region: dict[RegionIndex, list] = field(default_factory=dict)

    def points_in(self, idx) -> list:
        return self.per_region.get(RegionIndex(*idx), [])

    def counts(self) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=np.int64)
        for (r, c), pts in self.per_region.items():
            out[r, c] = len(pts)
        return out

    def all_points(self) -> list:
        return [p for idx in sorted(self.per_region) for p in self.per_region[idx]]


def mask_to_points(mask) -> list[Point]:
    """One point per foreground pixel, at its integer coordinates, row-major order."""
    rows, cols = np.nonzero(as_mask(mask))
    return [Point(float(r), float(c)) for r, c in zip(rows, cols)]


def group_by_region(points, grid: RegionGrid) -> RegionPointSets:
    sets = RegionPointSets(grid)
    for p in points:
        sets.per_region.setdefault(region_of(grid, p), []).append(p)
    return sets


def filter_by_score(points, threshold: float) -> list[ScoredPoint]:
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError(f"threshold must lie in [0, 1], got {threshold}")
    return [p for p in points if p[2] >= threshold]


def rasterize(points, height: int, width: int) -> np.ndarray:
    """Write point scores into their 1x1 bins; collisions keep the maximum.

    Points outside the image are dropped.
    """
    if height <= 0 or width <= 0:
        raise DimensionError(f"dimensions must be positive, got {height}x{width}")
    out = np.zeros((height, width), dtype=np.float64)
    arr = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return rasterize_array(arr[:, :2], arr[:, 2], out)


def rasterize_array(xy: np.ndarray, scores: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Vectorised rasterize into a preallocated zero map ``out`` (modified in place)."""
    if len(xy) == 0:
        return out
    r = np.floor(xy[:, 0] + 0.5)
    c = np.floor(xy[:, 1] + 0.5)
    keep = (r >= 0) & (r < out.shape[0]) & (c >= 0) & (c < out.shape[1])
    np.maximum.at(out, (r[keep].astype(np.intp), c[keep].astype(np.intp)), scores[keep])
    return out


def threshold_map(score_map, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"threshold must lie in [0, 1], got {t}")
    return (as_score_map(score_map) >= t).astype(np.uint8)


def region_targets(mask, grid: RegionGrid) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth points of every region as padded arrays.

    Returns ``(points, counts)`` with ``points`` of shape ``(H * W, D * D, 2)``
    and ``counts`` of shape ``(H * W,)``. Within a region the first
    ``counts[i]`` rows are its GT points in image row-major order, the same
    order :func:`mask_to_points` followed by :func:`group_by_region` yields.
    """
    m = as_mask(mask)
    if m.shape != (grid.image_height, grid.image_width):
        raise DimensionError(f"mask shape {m.shape} does not match grid image size")
    d = grid.downsample
    h, w = grid.shape
    tiles = m.reshape(h, d, w, d).transpose(0, 2, 1, 3).reshape(h * w, d * d)
    counts = tiles.sum(axis=1).astype(np.int64)
    order = np.argsort(1 - tiles, axis=1, kind="stable")
    local_r, local_c = np.divmod(order, d)
    region_r, region_c = np.divmod(np.arange(h * w), w)
    pts = np.empty((h * w, d * d, 2), dtype=np.float64)
    pts[:, :, 0] = region_r[:, None] * d + local_r
    pts[:, :, 1] = region_c[:, None] * d + local_c
    return pts, counts
