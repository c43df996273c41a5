import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from pointscatter.errors import DimensionError, PairingError, ParameterError, UndefinedMetricError
from pointscatter.metrics import (
    accuracy, auc, betti_numbers, centerline_scores, cl_dice, confusion_counts, dice, dilate,
    euler_characteristic, precision, recall, skeletonize, tolerant_centerline_scores,
    topology_errors, volumetric_scores,
)

from conftest import cell_complex_euler, ring, square


def two_rings():
    m = ring(shape=(12, 24))
    m |= ring(offset=(2, 12), shape=(12, 24))
    return m


HAND_PRED = np.array([[1, 1, 1], [0, 0, 0], [0, 0, 0]], dtype=np.uint8)
HAND_GT = np.array([[1, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=np.uint8)


def test_confusion_counts():
    ones = np.ones((2, 2), dtype=np.uint8)
    assert confusion_counts(ones, ones) == (4, 0, 0, 0)
    tp, _, _, tn = confusion_counts(HAND_PRED, 1 - HAND_PRED)
    assert tp == 0 and tn == 0
    assert confusion_counts(HAND_PRED, HAND_GT) == (2, 1, 1, 5)
    with pytest.raises(DimensionError):
        confusion_counts(ones, np.ones((3, 2)))


def test_pixel_scores():
    assert dice(HAND_PRED, HAND_GT) == pytest.approx(4 / 6)
    assert accuracy(HAND_PRED, HAND_GT) == pytest.approx(7 / 9)
    assert precision(HAND_PRED, HAND_GT) == pytest.approx(2 / 3)
    assert recall(HAND_PRED, HAND_GT) == pytest.approx(2 / 3)
    assert dice(HAND_GT, HAND_GT) == 1.0
    assert dice(HAND_PRED, 1 - HAND_PRED) == 0.0


def test_empty_conventions():
    z = np.zeros((3, 3), dtype=np.uint8)
    assert dice(z, z) == precision(z, z) == recall(z, z) == 1.0
    assert precision(z, HAND_GT) == 0.0 and recall(z, HAND_GT) == 0.0
    assert precision(HAND_GT, z) == 0.0 and recall(HAND_GT, z) == 0.0


def _pair_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_auc_examples():
    assert auc(np.array([[0.9, 0.4, 0.5]]), np.array([[1, 1, 0]])) == 0.5
    assert auc(np.array([[0.9, 0.8, 0.1]]), np.array([[1, 1, 0]])) == 1.0
    assert auc(np.full((2, 2), 0.3), np.array([[1, 0], [0, 1]])) == 0.5
    with pytest.raises(UndefinedMetricError):
        auc(np.zeros((2, 2)), np.zeros((2, 2)))


def test_auc_matches_pairwise_oracle(rng):
    for _ in range(20):
        s = np.round(rng.uniform(size=(5, 6)), 1)
        g = (rng.uniform(size=(5, 6)) < 0.4).astype(np.uint8)
        if g.all() or not g.any():
            continue
        assert auc(s, g) == pytest.approx(_pair_auc(s.ravel(), g.ravel()), abs=1e-12)


def test_betti_and_euler_fixtures():
    assert betti_numbers(square()) == (1, 0) and euler_characteristic(square()) == 1
    assert betti_numbers(ring()) == (1, 1) and euler_characteristic(ring()) == 0
    assert betti_numbers(two_rings()) == (2, 2) and euler_characteristic(two_rings()) == 0
    assert betti_numbers(np.zeros((4, 4))) == (0, 0)


def test_betti_connectivity_duality():
    diag = np.eye(4, dtype=np.uint8)
    assert betti_numbers(diag) == (1, 0)
    # diamond of diagonal neighbours encloses one 4-connected background pixel
    d = np.zeros((5, 5), dtype=np.uint8)
    d[1, 2] = d[2, 1] = d[2, 3] = d[3, 2] = 1
    assert betti_numbers(d) == (1, 1)
    assert euler_characteristic(d) == cell_complex_euler(d) == 0


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 16), st.integers(1, 16)), elements=st.integers(0, 1)))
def test_euler_matches_cell_complex(mask):
    assert euler_characteristic(mask) == cell_complex_euler(mask)


def test_topology_errors():
    assert topology_errors([ring()], [ring()]).as_dict() == {
        "betti0_error": 0.0, "betti1_error": 0.0, "euler_error": 0.0}
    e = topology_errors([ring()], [square()])
    assert (e.betti0_error, e.betti1_error, e.euler_error) == (0, 1, 1)
    e = topology_errors([two_rings()[:, :12], ring()], [np.zeros((12, 12), np.uint8) | ring(), square()])
    assert e.betti0_error == 0 and e.betti1_error == 0.5
    # mean of per-image errors (1, 0) and (0, 1)
    blob = square(size=2, offset=(8, 8))
    e = topology_errors([square() | blob, ring()], [square(), square()])
    assert (e.betti0_error, e.betti1_error) == (0.5, 0.5)
    with pytest.raises(PairingError):
        topology_errors([ring()], [])


def test_skeleton_examples():
    line = np.zeros((5, 9), dtype=np.uint8)
    line[2, 1:8] = 1
    assert np.array_equal(skeletonize(line), line)
    assert not skeletonize(np.zeros((4, 4))).any()
    assert np.array_equal(skeletonize(ring()), ring())


def test_skeleton_keeps_small_blocks():
    m = np.zeros((4, 4), dtype=np.uint8)
    m[1:3, 1:3] = 1
    s = skeletonize(m)
    assert s.any() and betti_numbers(s) == (1, 0)


def test_bar_skeleton_against_reference():
    from skimage.morphology import skeletonize as reference
    m = np.zeros((9, 26), dtype=np.uint8)
    m[2:7, 3:23] = 1
    ours = skeletonize(m).astype(bool)
    ref = reference(m.astype(bool))
    assert betti_numbers(ours)[0] == betti_numbers(ref)[0] == 1
    assert ours.sum(axis=0).max() == 1  # one pixel wide
    cols = np.nonzero(ours.any(axis=0))[0]
    ref_cols = np.nonzero(ref.any(axis=0))[0]
    assert abs(cols[0] - ref_cols[0]) <= 2 and abs(cols[-1] - ref_cols[-1]) <= 2
    assert cols[-1] - cols[0] >= 14


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 14), st.integers(1, 14)), elements=st.integers(0, 1)))
def test_skeleton_properties(mask):
    s = skeletonize(mask)
    assert not (s & ~mask.astype(bool)).any()
    assert betti_numbers(s) == betti_numbers(mask)
    assert np.array_equal(skeletonize(s), s)


def test_cl_dice():
    assert cl_dice(ring(), ring()) == 1.0
    assert cl_dice(square(size=3), square(size=3, offset=(7, 7))) == 0.0
    z = np.zeros((12, 12), dtype=np.uint8)
    assert cl_dice(z, z) == 1.0 and cl_dice(z, ring()) == 0.0
    cross = np.zeros((15, 15), dtype=np.uint8)
    cross[7, 2:13] = cross[2:13, 7] = 1
    thick = dilate(cross, 1)
    # the thick cross covers the thin one and its skeleton lies on the thin cross's dilation
    assert cl_dice(thick, cross) > 0.9
    with pytest.raises(DimensionError):
        cl_dice(ring(), np.zeros((3, 3)))


def test_dilate():
    m = np.zeros((9, 9), dtype=np.uint8)
    m[4, 4] = 1
    d = dilate(m, 3)
    offsets = [(dr, dc) for dr in range(-3, 4) for dc in range(-3, 4) if dr * dr + dc * dc <= 9]
    # enumerating the 7x7 window gives 29 offsets (the four at distance exactly 3 included)
    assert d.sum() == len(offsets) == 29
    assert all(d[4 + dr, 4 + dc] for dr, dc in offsets)
    assert np.array_equal(dilate(m, 0), m)
    assert not dilate(np.zeros((5, 5)), 3).any()
    with pytest.raises(ParameterError):
        dilate(m, -1)


def _line(row, shape=(16, 20)):
    m = np.zeros(shape, dtype=np.uint8)
    m[row, 2:18] = 1
    return m


def test_tolerant_scores():
    gt = _line(4)
    assert tolerant_centerline_scores(gt, gt) == (1.0, 1.0, 1.0)
    assert tolerant_centerline_scores(_line(6), gt, 3) == (1.0, 1.0, 1.0)
    assert tolerant_centerline_scores(_line(9), gt, 3) == (0.0, 0.0, 0.0)


def test_aggregate_scores():
    s = ring().astype(float)
    v = volumetric_scores(s, ring())
    assert (v.auc, v.dice, v.cl_dice, v.accuracy, v.precision, v.recall) == (1, 1, 1, 1, 1, 1)
    assert math.isnan(volumetric_scores(np.zeros((4, 4)), np.zeros((4, 4))).auc)
    c = centerline_scores(_line(6).astype(float), _line(4))
    assert (c.precision, c.recall, c.dice) == (1.0, 1.0, 1.0)
