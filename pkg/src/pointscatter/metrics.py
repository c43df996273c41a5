"""Volumetric and topological evaluation of binary predictions.

Connectivity follows the usual duality: 8-connectivity for foreground and
4-connectivity for background.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

from .core_types import as_mask, as_score_map, check_same_shape
from .errors import PairingError, ParameterError, UndefinedMetricError

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class VolumetricScores:
    auc: float
    dice: float
    cl_dice: float
    accuracy: float
    precision: float
    recall: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TopologyErrors:
    betti0_error: float
    betti1_error: float
    euler_error: float

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(pred, gt):
    p, g = as_mask(pred), as_mask(gt)
    check_same_shape(p, g)
    return p.astype(bool), g.astype(bool)


def confusion_counts(pred, gt) -> tuple[int, int, int, int]:
    p, g = _pair(pred, gt)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return tp, fp, fn, tn


def _ratio(num: int, den: int, empty: float) -> float:
    return num / den if den else empty


def dice(pred, gt) -> float:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    return _ratio(2 * tp, 2 * tp + fp + fn, 1.0)


def accuracy(pred, gt) -> float:
    tp, fp, fn, tn = confusion_counts(pred, gt)
    return (tp + tn) / (tp + fp + fn + tn)


def precision(pred, gt) -> float:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    # nothing predicted: perfect only if there was nothing to find
    return _ratio(tp, tp + fp, 1.0 if fn == 0 else 0.0)


def recall(pred, gt) -> float:
    tp, fp, fn, _ = confusion_counts(pred, gt)
    return _ratio(tp, tp + fn, 1.0 if fp == 0 else 0.0)


def auc(score_map, gt) -> float:
    """Probability that a random positive pixel outscores a random negative one.

    Exact Mann-Whitney statistic with midranks for ties.
    """
    s = as_score_map(score_map)
    g = as_mask(gt).astype(bool)
    check_same_shape(s, g)
    n_pos = int(g.sum())
    n_neg = g.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative pixel")
    ranks = rankdata(s.ravel(), method="average")
    rank_sum = float(ranks[g.ravel()].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# --- skeletonization -------------------------------------------------------

# neighbour offsets P2..P9, clockwise from north
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _build_tables():
    removable = np.zeros((2, 256), dtype=bool)
    for code in range(256):
        n = [(code >> k) & 1 for k in range(8)]
        b = sum(n)
        a = sum(1 for k in range(8) if n[k] == 0 and n[(k + 1) % 8] == 1)
        p2, p3, p4, p5, p6, p7, p8, p9 = n
        simple = 2 <= b <= 6 and a == 1
        removable[0, code] = simple and p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
        removable[1, code] = simple and p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
    return removable


_REMOVABLE = _build_tables()


def _codes(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] - 2, img.shape[1] - 2
    code = np.zeros((h, w), dtype=np.intp)
    for k, (dr, dc) in enumerate(_RING):
        code |= img[1 + dr:1 + dr + h, 1 + dc:1 + dc + w].astype(np.intp) << k
    return code


def _code_at(img: np.ndarray, r: int, c: int) -> int:
    code = 0
    for k, (dr, dc) in enumerate(_RING):
        code |= int(img[r + dr, c + dc]) << k
    return code


def skeletonize(mask) -> np.ndarray:
    """Thin a binary mask to a one-pixel-wide 8-connected skeleton.

    Zhang-Suen two-subiteration thinning. Candidates of each subiteration
    are found in parallel, then removed one at a time in raster order after
    re-checking the neighbourhood; this sequential confirmation keeps every
    removal a simple-point deletion, so two-pixel-thick strokes and 2x2
    blocks are thinned instead of erased.
    """
    m = as_mask(mask)
    img = np.pad(m, 1).astype(np.uint8)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            table = _REMOVABLE[step]
            cand = (img[1:-1, 1:-1] == 1) & table[_codes(img)]
            for r, c in zip(*np.nonzero(cand)):
                r += 1
                c += 1
                if table[_code_at(img, r, c)]:
                    img[r, c] = 0
                    changed = True
    return img[1:-1, 1:-1].copy()


def cl_dice(pred, gt) -> float:
    p, g = _pair(pred, gt)
    sp = skeletonize(p).astype(bool)
    sg = skeletonize(g).astype(bool)
    n_sp, n_sg = int(sp.sum()), int(sg.sum())
    if n_sp == 0 and n_sg == 0:
        return 1.0
    if n_sp == 0 or n_sg == 0:
        return 0.0
    tprec = np.count_nonzero(sp & g) / n_sp
    tsens = np.count_nonzero(sg & p) / n_sg
    if tprec + tsens == 0:
        return 0.0
    return 2.0 * tprec * tsens / (tprec + tsens)


# --- topology --------------------------------------------------------------

def betti_numbers(mask) -> tuple[int, int]:
    m = as_mask(mask).astype(bool)
    _, b0 = ndimage.label(m, structure=EIGHT)
    _, bg = ndimage.label(~np.pad(m, 1), structure=FOUR)
    return int(b0), int(bg) - 1


def euler_characteristic(mask) -> int:
    b0, b1 = betti_numbers(mask)
    return b0 - b1


def topology_errors(preds, gts) -> TopologyErrors:
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise PairingError(f"{len(preds)} predictions for {len(gts)} ground truths")
    if not preds:
        return TopologyErrors(0.0, 0.0, 0.0)
    errs = np.zeros((len(preds), 3))
    for k, (p, g) in enumerate(zip(preds, gts)):
        p, g = _pair(p, g)
        bp, bg = betti_numbers(p), betti_numbers(g)
        errs[k] = (abs(bp[0] - bg[0]), abs(bp[1] - bg[1]),
                   abs((bp[0] - bp[1]) - (bg[0] - bg[1])))
    mean = errs.mean(axis=0)
    return TopologyErrors(float(mean[0]), float(mean[1]), float(mean[2]))


# --- tolerance -------------------------------------------------------------

def disk(radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    d = np.arange(-r, r + 1)
    return (d[:, None] ** 2 + d[None, :] ** 2) <= radius * radius


def dilate(mask, radius: float) -> np.ndarray:
    """Foreground grown by every pixel within Euclidean distance ``radius``."""
    if radius < 0:
        raise ParameterError(f"radius must be >= 0, got {radius}")
    m = as_mask(mask).astype(bool)
    if radius < 1 or not m.any():
        return m.astype(np.uint8)
    return ndimage.binary_dilation(m, structure=disk(radius)).astype(np.uint8)


def tolerant_centerline_scores(pred, gt_centerline, radius: float = 3.0) -> tuple[float, float, float]:
    p, g = _pair(pred, gt_centerline)
    n_p, n_g = int(p.sum()), int(g.sum())
    hit_p = np.count_nonzero(p & dilate(g, radius).astype(bool))
    hit_g = np.count_nonzero(g & dilate(p, radius).astype(bool))
    prec = _ratio(hit_p, n_p, 1.0 if n_g == 0 else 0.0)
    rec = _ratio(hit_g, n_g, 1.0 if n_p == 0 else 0.0)
    if n_p == 0 and n_g == 0:
        f1 = 1.0
    elif prec + rec == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * prec * rec / (prec + rec)
    return prec, rec, f1


# --- aggregate -------------------------------------------------------------

def volumetric_scores(score_map, gt, threshold: float = 0.5) -> VolumetricScores:
    """All volumetric scores of a score map against a GT mask.

    AUC is NaN when the GT mask has a single class.
    """
    s = as_score_map(score_map)
    pred = (s >= threshold).astype(np.uint8)
    try:
        a = auc(s, gt)
    except UndefinedMetricError:
        a = float("nan")
    return VolumetricScores(a, dice(pred, gt), cl_dice(pred, gt), accuracy(pred, gt),
                            precision(pred, gt), recall(pred, gt))


def centerline_scores(score_map, gt_centerline, radius: float = 3.0,
                      threshold: float = 0.5) -> VolumetricScores:
    """Volumetric scores for the centerline task, precision/recall/Dice within ``radius``."""
    s = as_score_map(score_map)
    pred = (s >= threshold).astype(np.uint8)
    try:
        a = auc(s, gt_centerline)
    except UndefinedMetricError:
        a = float("nan")
    prec, rec, f1 = tolerant_centerline_scores(pred, gt_centerline, radius)
    return VolumetricScores(a, f1, cl_dice(pred, gt_centerline), accuracy(pred, gt_centerline),
                            prec, rec)
