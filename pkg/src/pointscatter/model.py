"""Patch-wise point predictor and its training loop.

Each scatter region sees the ``3D x 3D`` window of raw pixels centred on
it (zero padded at the borders). One tanh hidden layer feeds two affine
heads: ``N`` objectness logits and ``N`` 2-D offsets from the region
center. Gradients are written out by hand.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .convert import filter_by_score, rasterize_array, region_targets
from .core_types import RegionGrid, ScoredPoint, as_score_map, make_grid
from .errors import CapacityError, DimensionError, ParameterError, StaleGradientError, TrainingDivergedError
from .losses import LossBreakdown, assign_and_loss, sigmoid

log = logging.getLogger(__name__)

PARAM_NAMES = ("w1", "b1", "w_obj", "b_obj", "w_loc", "b_loc")


@dataclass
class TrainConfig:
    downsample: int = 4
    points_per_region: int = 16
    eta: float = 0.8
    lam: float = 10.0
    alpha: float = 0.6
    gamma: float = 2.0
    threshold: float = 0.1
    hidden: int = 64
    lr: float = 0.03
    momentum: float = 0.9
    schedule: str = "cosine"  # or "constant"
    iterations: int = 3000
    batch_size: int = 4
    seed: int = 0
    target: str = "mask"  # or "centerline"
    matcher: str = "greedy"  # or "hungarian"

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class ModelParams:
    downsample: int
    points_per_region: int
    hidden: int
    w1: np.ndarray
    b1: np.ndarray
    w_obj: np.ndarray
    b_obj: np.ndarray
    w_loc: np.ndarray
    b_loc: np.ndarray

    @property
    def window(self) -> int:
        return 3 * self.downsample

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def replace(self, arrays: dict[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.downsample, self.points_per_region, self.hidden, **arrays)

    def validate(self) -> None:
        f, h, n = self.window ** 2, self.hidden, self.points_per_region
        expected = {"w1": (f, h), "b1": (h,), "w_obj": (h, n), "b_obj": (n,),
                    "w_loc": (h, 2 * n), "b_loc": (2 * n,)}
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} contains non-finite values")


def default_offsets(downsample: int, n: int) -> np.ndarray:
    """Initial slot offsets: the pixel centres of a region, cycled when N > D*D."""
    half = (downsample - 1) / 2.0
    local = np.arange(downsample * downsample)
    grid = np.stack(np.divmod(local, downsample), axis=1) - half
    return grid[np.arange(n) % len(grid)].astype(np.float64)


def init_params(seed: int, downsample: int = 4, n: int = 16, hidden: int = 64,
                prior: float = 0.1) -> ModelParams:
    if hidden < 1:
        raise ParameterError(f"hidden width must be >= 1, got {hidden}")
    if downsample < 1 or n < 1:
        raise ParameterError("downsample and points per region must be >= 1")
    rng = np.random.default_rng(seed)
    f = (3 * downsample) ** 2
    lim1 = math.sqrt(3.0 / f)
    lim2 = 0.1 / math.sqrt(hidden)
    return ModelParams(
        downsample, n, hidden,
        w1=rng.uniform(-lim1, lim1, size=(f, hidden)),
        b1=np.zeros(hidden),
        w_obj=rng.uniform(-lim2, lim2, size=(hidden, n)),
        b_obj=np.full(n, math.log(prior / (1.0 - prior))),
        w_loc=rng.uniform(-lim2, lim2, size=(hidden, 2 * n)),
        b_loc=default_offsets(downsample, n).ravel(),
    )


def extract_windows(image: np.ndarray, grid: RegionGrid) -> np.ndarray:
    """Flattened ``3D x 3D`` context window of every region, shape ``(H * W, 9 D^2)``."""
    d = grid.downsample
    padded = np.pad(image, d)
    win = np.lib.stride_tricks.sliding_window_view(padded, (3 * d, 3 * d))[::d, ::d]
    return win.reshape(grid.num_regions, 9 * d * d)


@dataclass
class ForwardResult:
    """Outputs of :func:`forward` plus what :func:`backward` needs."""

    logits: np.ndarray
    points: np.ndarray
    features: np.ndarray
    hidden: np.ndarray
    params: ModelParams = field(repr=False)

    @property
    def scores(self) -> np.ndarray:
        return sigmoid(self.logits)


def forward_features(params: ModelParams, features: np.ndarray, centers: np.ndarray) -> ForwardResult:
    n = params.points_per_region
    hidden = np.tanh(features @ params.w1 + params.b1)
    logits = hidden @ params.w_obj + params.b_obj
    offsets = (hidden @ params.w_loc + params.b_loc).reshape(-1, n, 2)
    points = centers[:, None, :] + offsets
    return ForwardResult(logits, points, features, hidden, params)


def forward(params: ModelParams, image, grid: RegionGrid) -> ForwardResult:
    img = as_score_map(image)
    if img.shape != (grid.image_height, grid.image_width):
        raise DimensionError(f"image shape {img.shape} does not match grid "
                             f"{grid.image_height}x{grid.image_width}")
    if grid.downsample != params.downsample:
        raise DimensionError(f"model downsample {params.downsample} != grid downsample {grid.downsample}")
    return forward_features(params, extract_windows(img, grid), grid.centers())


def backward(params: ModelParams, result: ForwardResult, dlogits, dpoints) -> dict[str, np.ndarray]:
    """Gradients of the loss with respect to every parameter array."""
    if result.params is not params:
        raise StaleGradientError("forward result was produced with different parameters")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    dpoints = np.asarray(dpoints, dtype=np.float64)
    if dlogits.shape != result.logits.shape or dpoints.shape != result.points.shape:
        raise StaleGradientError("loss gradients do not match the forward outputs")
    h = result.hidden
    doff = dpoints.reshape(len(dpoints), -1)
    dh = dlogits @ params.w_obj.T + doff @ params.w_loc.T
    dpre = dh * (1.0 - h * h)
    return {
        "w1": result.features.T @ dpre,
        "b1": dpre.sum(axis=0),
        "w_obj": h.T @ dlogits,
        "b_obj": dlogits.sum(axis=0),
        "w_loc": h.T @ doff,
        "b_loc": doff.sum(axis=0),
    }


def predict(params: ModelParams, image, grid: RegionGrid, threshold: float = 0.1) -> list[ScoredPoint]:
    out = forward(params, image, grid)
    pts = out.points.reshape(-1, 2)
    scores = out.scores.ravel()
    flat = [ScoredPoint(float(x), float(y), float(s)) for (x, y), s in zip(pts, scores)]
    return filter_by_score(flat, threshold)


def predict_score_map(params: ModelParams, image, grid: RegionGrid, threshold: float = 0.1) -> np.ndarray:
    """Predicted points above ``threshold`` rasterized into a score map."""
    out = forward(params, image, grid)
    pts = out.points.reshape(-1, 2)
    scores = out.scores.ravel()
    keep = scores >= threshold
    return rasterize_array(pts[keep], scores[keep], np.zeros((grid.image_height, grid.image_width)))


@dataclass
class _Prepared:
    features: np.ndarray
    gt_points: np.ndarray
    counts: np.ndarray


def prepare(samples, config: TrainConfig) -> tuple[RegionGrid, list[_Prepared]]:
    if not samples:
        raise ParameterError("training needs at least one sample")
    h, w = samples[0].image.shape
    grid = make_grid(h, w, config.downsample)
    out = []
    for k, s in enumerate(samples):
        if s.image.shape != (h, w):
            raise DimensionError(f"sample {k} has shape {s.image.shape}, expected {(h, w)}")
        target = s.mask if config.target == "mask" else s.centerline
        pts, counts = region_targets(target, grid)
        if counts.max(initial=0) > config.points_per_region:
            r = int(np.argmax(counts))
            raise CapacityError(f"sample {k}, region {divmod(r, grid.grid_width)}: "
                                f"{int(counts[r])} GT points > N={config.points_per_region}")
        out.append(_Prepared(extract_windows(as_score_map(s.image), grid), pts, counts))
    return grid, out


def learning_rate(config: TrainConfig, step: int) -> float:
    if config.schedule == "constant":
        return config.lr
    if config.schedule == "cosine":
        return 0.5 * config.lr * (1.0 + math.cos(math.pi * step / max(1, config.iterations)))
    raise ParameterError(f"unknown schedule {config.schedule!r}")


def train(samples, config: TrainConfig, params: ModelParams | None = None, callback=None):
    """SGD with momentum on the matched focal + L1 objective.

    ``callback(step, params, batch_loss)`` is called after every step if
    given. Returns ``(params, history)`` where ``history`` holds one
    :class:`LossBreakdown` per step.
    """
    if config.target not in ("mask", "centerline"):
        raise ParameterError(f"unknown target {config.target!r}")
    grid, prepared = prepare(samples, config)
    if params is None:
        params = init_params(config.seed, config.downsample, config.points_per_region, config.hidden)
    params.validate()
    rng = np.random.default_rng(config.seed + 1)
    centers = grid.centers()
    velocity = {k: np.zeros_like(v) for k, v in params.arrays().items()}
    history: list[LossBreakdown] = []
    order = np.empty(0, dtype=np.int64)
    cursor = 0
    bs = min(config.batch_size, len(prepared))
    for step in range(config.iterations):
        if cursor + bs > len(order):
            order = rng.permutation(len(prepared))
            cursor = 0
        # sorted so a batch's reduction order depends only on which samples it holds
        batch = [prepared[i] for i in np.sort(order[cursor:cursor + bs])]
        cursor += bs
        feats = np.concatenate([b.features for b in batch])
        gts = (np.concatenate([b.gt_points for b in batch]), np.concatenate([b.counts for b in batch]))
        out = forward_features(params, feats, np.tile(centers, (bs, 1)))
        loss, dlogits, dpoints, _ = assign_and_loss(
            gts, out.logits, out.points, config.eta, config.lam, config.alpha, config.gamma,
            matcher=config.matcher)
        if not math.isfinite(loss.total):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: objectness={loss.objectness}, "
                f"regression={loss.regression}, lr={config.lr}")
        history.append(loss)
        grads = backward(params, out, dlogits, dpoints)
        lr = learning_rate(config, step)
        arrays = {}
        for name, value in params.arrays().items():
            velocity[name] = config.momentum * velocity[name] - lr * grads[name]
            arrays[name] = value + velocity[name]
        params = params.replace(arrays)
        if callback is not None:
            callback(step, params, loss)
        if step % 100 == 0:
            log.debug("step %d total %.4f obj %.4f reg %.4f", step, loss.total,
                      loss.objectness, loss.regression)
    return params, history
