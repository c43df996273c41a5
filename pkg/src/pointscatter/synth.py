"""Deterministic synthetic tubular images: branched curvy tubes with masks and centerlines.

Randomness comes from numpy's PCG64 generator seeded with the sample seed,
so a seed always yields the same bytes. A sample is drawn as follows:

1. Each branch is a random walk with step 0.5 px whose heading changes by
   at most ``max_turn`` radians per step. The first branch starts at a
   uniform random point. Later branches start, with probability
   ``branch_prob``, from a random point of an earlier walk, and otherwise
   from a fresh uniform random point. A walk stops when it leaves the
   canvas or reaches its drawn length.
2. Each branch is stroked with a disk of diameter ``w`` drawn uniformly
   from ``width_range``.
3. The image is the mask blurred with a Gaussian of ``blur`` px, plus
   uniform noise in ``[-noise, noise]``, clamped to [0, 1].
4. The centerline is the skeleton of the mask.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .core_types import as_mask
from .errors import DimensionError, ParameterError
from .metrics import skeletonize


@dataclass(frozen=True)
class SynthParams:
    height: int = 48
    width: int = 48
    n_branches: int = 3
    width_range: tuple[int, int] = (1, 3)
    noise: float = 0.1
    blur: float = 0.7
    max_turn: float = 0.15
    branch_prob: float = 0.6
    length_range: tuple[float, float] = (0.4, 1.0)  # fraction of the canvas diagonal
    downsample: int = 4

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SyntheticSample:
    image: np.ndarray
    mask: np.ndarray
    centerline: np.ndarray


def _walk(rng: np.random.Generator, start, height: int, width: int, length: float,
          max_turn: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi)
    x, y = float(start[0]), float(start[1])
    steps = max(1, int(length / 0.5))
    turns = rng.uniform(-max_turn, max_turn, size=steps)
    pts = [(x, y)]
    for k in range(steps):
        theta += turns[k]
        x += 0.5 * math.cos(theta)
        y += 0.5 * math.sin(theta)
        if not (-0.5 <= x < height - 0.5 and -0.5 <= y < width - 0.5):
            break
        pts.append((x, y))
    return np.asarray(pts)


def stroke(mask: np.ndarray, path: np.ndarray, w: int) -> None:
    """Mark every pixel within ``w / 2`` of a rounded path sample (in place)."""
    h, wd = mask.shape
    centers = np.unique(np.rint(path).astype(np.int64), axis=0)
    r = w / 2.0
    ri = int(math.floor(r))
    d = np.arange(-ri, ri + 1)
    dr, dc = np.meshgrid(d, d, indexing="ij")
    keep = dr ** 2 + dc ** 2 <= r * r
    offs = np.stack([dr[keep], dc[keep]], axis=1)
    cells = (centers[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    ok = (cells[:, 0] >= 0) & (cells[:, 0] < h) & (cells[:, 1] >= 0) & (cells[:, 1] < wd)
    mask[cells[ok, 0], cells[ok, 1]] = 1


def draw_tubes(rng: np.random.Generator, params: SynthParams) -> np.ndarray:
    h, w = params.height, params.width
    mask = np.zeros((h, w), dtype=np.uint8)
    diag = math.hypot(h, w)
    walks: list[np.ndarray] = []
    lo, hi = params.width_range
    for b in range(params.n_branches):
        fresh = rng.uniform(0.0, 1.0, size=2) * (h - 1, w - 1)
        if walks and rng.uniform() < params.branch_prob:
            parent = walks[int(rng.integers(len(walks)))]
            start = parent[int(rng.integers(len(parent)))]
        else:
            start = fresh
        length = rng.uniform(*params.length_range) * diag
        path = _walk(rng, start, h, w, length, params.max_turn)
        walks.append(path)
        stroke(mask, path, int(rng.integers(lo, hi + 1)))
    return mask


def _validate(params: SynthParams) -> None:
    if params.height <= 0 or params.width <= 0:
        raise DimensionError(f"image size must be positive, got {params.height}x{params.width}")
    d = params.downsample
    if params.height % d or params.width % d:
        raise DimensionError(f"image size {params.height}x{params.width} not divisible by {d}")
    lo, hi = params.width_range
    if not 1 <= lo <= hi <= d:
        # a stroke wider than D keeps K <= D*D anyway, but wider tubes stop looking tubular
        raise ParameterError(f"width_range must satisfy 1 <= lo <= hi <= {d}, got {params.width_range}")
    if not 0.0 <= params.noise < 1.0:
        raise ParameterError(f"noise must lie in [0, 1), got {params.noise}")
    if params.n_branches < 0:
        raise ParameterError("n_branches must be >= 0")


def render(rng: np.random.Generator, mask: np.ndarray, params: SynthParams) -> np.ndarray:
    img = mask.astype(np.float64)
    if params.blur > 0:
        img = ndimage.gaussian_filter(img, params.blur, mode="constant")
        peak = img.max()
        if peak > 0:
            img = img / peak
    if params.noise > 0:
        img = img + rng.uniform(-params.noise, params.noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_sample(seed: int, params: SynthParams | None = None, **overrides) -> SyntheticSample:
    params = params or SynthParams()
    if overrides:
        params = SynthParams(**{**params.as_dict(), **overrides})
    _validate(params)
    rng = np.random.default_rng(seed)
    mask = draw_tubes(rng, params)
    image = render(rng, mask, params)
    centerline = skeletonize(mask)
    return SyntheticSample(image, as_mask(mask), centerline)


def generate_dataset(seed: int, count: int, params: SynthParams | None = None) -> list[SyntheticSample]:
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    return [generate_sample(seed + k, params) for k in range(count)]
