"""Training objective: focal objectness loss plus weighted L1 regression.

All functions work on logits and return analytic gradients alongside the
loss value. The label assignment is treated as a constant when
differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convert import RegionPointSets
from .errors import CapacityError, ParameterError
from .matching import batched_greedy_array, hungarian_match, pairwise_costs


@dataclass(frozen=True)
class LossBreakdown:
    objectness: float
    regression: float
    total: float
    gt_count: int


@dataclass
class AssignedTargets:
    """Per-region assignment of GT points to prediction slots.

    ``sigma[r, i]`` is the slot matched to GT point ``i`` of region ``r``
    (``-1`` for padding rows beyond ``counts[r]``). Slots not named in
    ``sigma`` are negatives.
    """

    sigma: np.ndarray
    gt_points: np.ndarray
    counts: np.ndarray
    num_slots: int

    def positive_mask(self) -> np.ndarray:
        r, i = np.nonzero(self.sigma >= 0)
        mask = np.zeros((self.sigma.shape[0], self.num_slots), dtype=bool)
        mask[r, self.sigma[r, i]] = True
        return mask

    def slot_targets(self) -> np.ndarray:
        """Target point per slot, shape ``(R, N, 2)``; zero for negatives."""
        r, i = np.nonzero(self.sigma >= 0)
        out = np.zeros((self.sigma.shape[0], self.num_slots, 2))
        out[r, self.sigma[r, i]] = self.gt_points[r, i]
        return out


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(z):
    return _sigmoid(z)


def focal_loss(logit, target, alpha: float, gamma: float):
    """Focal loss on a logit and its derivative with respect to the logit.

    Positives are weighted by ``alpha`` and negatives by ``1 - alpha``.
    ``ln p`` and ``ln(1 - p)`` are taken as ``-softplus(-z)`` and
    ``-softplus(z)``, so saturated logits never hit ``log(0)``.
    Works elementwise on arrays.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma}")
    z = np.asarray(logit, dtype=np.float64)
    t = np.asarray(target)
    p = _sigmoid(z)
    q = _sigmoid(-z)  # 1 - p without cancellation
    sp_neg = _softplus(-z)  # -ln p
    sp_pos = _softplus(z)   # -ln(1 - p)
    q_g = q ** gamma
    p_g = p ** gamma
    loss_pos = alpha * q_g * sp_neg
    loss_neg = (1.0 - alpha) * p_g * sp_pos
    grad_pos = -alpha * q_g * (gamma * p * sp_neg + q)
    grad_neg = (1.0 - alpha) * p_g * (gamma * q * sp_pos + p)
    pos = t == 1
    loss = np.where(pos, loss_pos, loss_neg)
    grad = np.where(pos, grad_pos, grad_neg)
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def regression_loss(pred, target):
    """L1 distance and its subgradient (``sign(0) = 0``) with respect to ``pred``."""
    delta = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    loss = np.abs(delta).sum(axis=-1)
    grad = np.sign(delta)
    if np.ndim(loss) == 0:
        return float(loss), grad
    return loss, grad


def total_loss(logits, points, targets: AssignedTargets, lam: float, alpha: float, gamma: float):
    """Combine objectness and regression terms and normalise by the GT count.

    ``logits`` is ``(R, N)`` and ``points`` ``(R, N, 2)``. Returns the
    :class:`LossBreakdown` together with gradients of the normalised total
    with respect to ``logits`` and ``points``.
    """
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    logits = np.asarray(logits, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    pos = targets.positive_mask()
    obj, dobj = focal_loss(logits, pos.astype(np.int8), alpha, gamma)
    reg, dreg = regression_loss(points, targets.slot_targets())
    reg = np.where(pos, reg, 0.0)
    dreg = dreg * pos[..., None]
    gt_count = int(targets.counts.sum())
    norm = max(1, gt_count)
    # index-ordered summation keeps training reproducible
    obj_sum = float(np.sum(obj))
    reg_sum = float(np.sum(reg))
    breakdown = LossBreakdown(obj_sum, reg_sum, (obj_sum + lam * reg_sum) / norm, gt_count)
    return breakdown, dobj / norm, lam * dreg / norm


def padded_ground_truth(gt_regions: RegionPointSets) -> tuple[np.ndarray, np.ndarray]:
    """Convert grouped GT points to ``(points (R, K_max, 2), counts (R,))``."""
    grid = gt_regions.grid
    counts = gt_regions.counts().ravel()
    k_max = int(counts.max()) if counts.size else 0
    pts = np.zeros((grid.num_regions, k_max, 2))
    for idx, plist in gt_regions.per_region.items():
        if plist:
            pts[grid.flat_index(idx), :len(plist)] = np.asarray(plist, dtype=np.float64)[:, :2]
    return pts, counts


def match_regions(gt_points, counts, logits, points, eta: float, matcher: str = "greedy") -> np.ndarray:
    """Assignment for every region, ``(R, K_max)`` slot indices with ``-1`` padding."""
    n = logits.shape[1]
    bad = np.nonzero(counts > n)[0]
    if bad.size:
        raise CapacityError(
            f"region {int(bad[0])} has {int(counts[bad[0]])} GT points but only {n} slots")
    k_max = gt_points.shape[1]
    sigma = np.full((len(counts), k_max), -1, dtype=np.int64)
    live = np.nonzero(counts > 0)[0]
    if live.size == 0:
        return sigma
    kk = int(counts[live].max())
    costs = pairwise_costs(gt_points[live, :kk], points[live], _sigmoid(logits[live]), eta)
    if matcher == "greedy":
        sigma[live, :kk] = batched_greedy_array(costs, counts[live])
    elif matcher == "hungarian":
        for slot, r in enumerate(live):
            k = int(counts[r])
            sigma[r, :k] = hungarian_match(costs[slot, :k]).assignment
    else:
        raise ParameterError(f"unknown matcher {matcher!r}")
    return sigma


def assign_and_loss(gt_regions, logits, points, eta: float, lam: float, alpha: float, gamma: float,
                    matcher: str = "greedy"):
    """Match every region, then evaluate :func:`total_loss`.

    ``gt_regions`` is a :class:`RegionPointSets` or a ``(points, counts)``
    pair as produced by :func:`convert.region_targets`.
    Returns ``(breakdown, dlogits, dpoints, targets)``.
    """
    if isinstance(gt_regions, RegionPointSets):
        gt_points, counts = padded_ground_truth(gt_regions)
    else:
        gt_points, counts = gt_regions
    logits = np.asarray(logits, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if logits.shape[0] != len(counts):
        raise ParameterError(f"predictions cover {logits.shape[0]} regions, GT has {len(counts)}")
    sigma = match_regions(gt_points, counts, logits, points, eta, matcher)
    targets = AssignedTargets(sigma, gt_points, counts, logits.shape[1])
    breakdown, dlogits, dpoints = total_loss(logits, points, targets, lam, alpha, gamma)
    return breakdown, dlogits, dpoints, targets
