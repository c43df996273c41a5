"""Shared data model: points, masks, score maps and the scatter-region grid.

Coordinates follow the pixel-center convention: pixel ``(r, c)`` covers
``[r, r + 1) x [c, c + 1)`` and a point at integer ``(r, c)`` sits on it.
``x`` is the row coordinate and ``y`` the column coordinate.

Masks and score maps are plain 2-D numpy arrays (``uint8`` in {0, 1} and
``float64`` in [0, 1]); :func:`as_mask` and :func:`as_score_map` validate and
normalise them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BoundsError, DimensionError, ParameterError


class Point(NamedTuple):
    x: float
    y: float


class ScoredPoint(NamedTuple):
    x: float
    y: float
    score: float

    @property
    def point(self) -> Point:
        return Point(self.x, self.y)


class RegionIndex(NamedTuple):
    row: int
    col: int


def make_point(x: float, y: float) -> Point:
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ParameterError(f"point coordinates must be finite, got ({x}, {y})")
    return Point(float(x), float(y))


def make_scored_point(x: float, y: float, score: float) -> ScoredPoint:
    make_point(x, y)
    if not 0.0 <= score <= 1.0:
        raise ParameterError(f"score must lie in [0, 1], got {score}")
    return ScoredPoint(float(x), float(y), float(score))


def as_mask(data) -> np.ndarray:
    """Return ``data`` as a 2-D ``uint8`` array of zeros and ones."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.isin(arr, (0, 1)).all():
        raise ParameterError("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def as_score_map(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"score map must be 2-D, got shape {arr.shape}")
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ParameterError("score map values must lie in [0, 1]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


@dataclass(frozen=True)
class RegionGrid:
    """Partition of an image into ``downsample x downsample`` scatter regions."""

    image_height: int
    image_width: int
    downsample: int
    grid_height: int
    grid_width: int

    def __post_init__(self):
        if self.downsample < 1:
            raise ParameterError(f"downsample must be >= 1, got {self.downsample}")
        if (self.image_height != self.grid_height * self.downsample
                or self.image_width != self.grid_width * self.downsample):
            raise DimensionError("image size must equal grid size times downsample")

    @property
    def num_regions(self) -> int:
        return self.grid_height * self.grid_width

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid_height, self.grid_width)

    def region_of(self, p) -> RegionIndex:
        return region_of(self, p)

    def region_center(self, idx) -> Point:
        return region_center(self, idx)

    def centers(self) -> np.ndarray:
        """Centers of all regions in row-major order, shape ``(H * W, 2)``."""
        half = (self.downsample - 1) / 2.0
        rows = np.arange(self.grid_height) * self.downsample + half
        cols = np.arange(self.grid_width) * self.downsample + half
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        return np.stack([rr.ravel(), cc.ravel()], axis=1)

    def flat_index(self, idx) -> int:
        return idx[0] * self.grid_width + idx[1]


def make_grid(image_height: int, image_width: int, downsample: int) -> RegionGrid:
    if image_height <= 0 or image_width <= 0:
        raise DimensionError(f"image dimensions must be positive, got {image_height}x{image_width}")
    if downsample < 1:
        raise ParameterError(f"downsample must be >= 1, got {downsample}")
    if image_height % downsample or image_width % downsample:
        raise DimensionError(
            f"image size {image_height}x{image_width} is not divisible by downsample {downsample}")
    return RegionGrid(image_height, image_width, downsample,
                      image_height // downsample, image_width // downsample)


def region_of(grid: RegionGrid, p) -> RegionIndex:
    x, y = p[0], p[1]
    if not (0 <= x < grid.image_height and 0 <= y < grid.image_width):
        raise BoundsError(f"point ({x}, {y}) outside {grid.image_height}x{grid.image_width} image")
    return RegionIndex(int(x // grid.downsample), int(y // grid.downsample))


def region_center(grid: RegionGrid, idx) -> Point:
    row, col = idx
    if not (0 <= row < grid.grid_height and 0 <= col < grid.grid_width):
        raise BoundsError(f"region ({row}, {col}) outside {grid.grid_height}x{grid.grid_width} grid")
    half = (grid.downsample - 1) / 2.0
    return Point(grid.downsample * row + half, grid.downsample * col + half)
