"""Acceptance criteria; each test records one PASS/FAIL line in the terminal summary."""

import math
import time

import numpy as np
import pytest

from pointscatter.bench import benchmark
from pointscatter.cli import main
from pointscatter.convert import mask_to_points, rasterize, region_targets, threshold_map
from pointscatter.core_types import ScoredPoint, make_grid
from pointscatter.matching import (
    batched_greedy, brute_force_match, greedy_match, hungarian_match, pairwise_costs,
)
from pointscatter.metrics import betti_numbers, centerline_scores, euler_characteristic, volumetric_scores
from pointscatter.model import forward, predict_score_map

from conftest import cell_complex_euler, ring, square
from gradcheck import loss_gradient_error, model_gradient_error, random_problem


def _random_matrix(rng, k, n):
    if rng.uniform() < 0.3:
        # small integers: plenty of exact ties
        return rng.integers(0, 4, size=(k, n)).astype(np.float64)
    return rng.uniform(0, 10, size=(k, n))


def test_1_hungarian_matches_brute_force(report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        k = int(rng.integers(0, n + 1))
        c = _random_matrix(rng, k, n)
        if hungarian_match(c).total_cost(c) != brute_force_match(c).total_cost(c):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report("1 matching optimality (Hungarian == brute force)", ok,
           f"mismatches={mismatches}/1000 time={elapsed:.2f}s (<10s)")
    assert ok


def test_2_batched_greedy_equals_sequential(report):
    rng = np.random.default_rng(2)
    mats = [_random_matrix(rng, 16, 16) for _ in range(1000)]
    t0 = time.perf_counter()
    batched = batched_greedy(mats)
    sequential = [greedy_match(c) for c in mats]
    elapsed = time.perf_counter() - t0
    diffs = sum(a != b for a, b in zip(batched, sequential))
    ok = diffs == 0 and elapsed < 5
    report("2 batched greedy == sequential greedy", ok,
           f"differences={diffs}/1000 time={elapsed:.2f}s (<5s)")
    assert ok


@pytest.mark.slow
def test_3_runtime_gap(report):
    t0 = time.perf_counter()
    rows = benchmark([384, 768, 1024], downsample=4, n=16, batch=4)
    elapsed = time.perf_counter() - t0
    by = {(r["image_size"], r["method"]): r for r in rows}
    g = by[1024, "greedy"]
    faster_everywhere = all(by[s, "greedy"]["seconds"] < by[s, "hungarian"]["seconds"] for s in (384, 768, 1024))
    ok = g["seconds"] < 0.5 and g["speedup"] >= 50 and elapsed < 300 and faster_everywhere
    report("3 runtime gap at 1024^2", ok,
           f"greedy={g['seconds']:.3f}s (<0.5s) hungarian={by[1024, 'hungarian']['seconds']:.2f}s "
           f"speedup={g['speedup']:.0f}x (>=50x) bench={elapsed:.0f}s (<300s)")
    assert ok


@pytest.mark.slow
def test_4_greedy_cost_close_to_hungarian(report, trained_mask):
    grid = make_grid(48, 48, 4)
    cfg = trained_mask.config
    greedy_total, hungarian_total, regions = [], [], 0
    for s in trained_mask.heldout:
        out = forward(trained_mask.params, s.image, grid)
        pts, counts = region_targets(s.mask, grid)
        for r in np.nonzero(counts)[0]:
            if regions == 200:
                break
            k = int(counts[r])
            c = pairwise_costs(pts[r, :k], out.points[r], out.scores[r], cfg.eta)
            greedy_total.append(greedy_match(c).total_cost(c))
            hungarian_total.append(hungarian_match(c).total_cost(c))
            regions += 1
    g, h = math.fsum(greedy_total), math.fsum(hungarian_total)
    ratio = g / h
    ok = regions == 200 and ratio <= 1.10
    report("4 greedy cost within 10% of Hungarian", ok,
           f"regions={regions} greedy={g:.3f} hungarian={h:.3f} ratio={ratio:.4f} (<=1.10)")
    assert ok


def test_5_gradient_check(report):
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    loss_errors, model_errors = [], []
    while len(loss_errors) < 100:
        e = loss_gradient_error(rng)
        if e is not None:
            loss_errors.append(e)
    while len(model_errors) < 100:
        e = model_gradient_error(*random_problem(rng))
        if e is not None:
            model_errors.append(e)
    elapsed = time.perf_counter() - t0
    worst = max(loss_errors + model_errors)
    ok = worst < 1e-5 and elapsed < 60
    report("5 gradient check (total_loss + model backward)", ok,
           f"configs=100+100 max_rel_err={worst:.2e} (<1e-5) time={elapsed:.1f}s (<60s)")
    assert ok


@pytest.mark.slow
def test_6_end_to_end_learning(report, trained_mask, trained_centerline):
    grid = make_grid(48, 48, 4)
    mask_scores = [volumetric_scores(predict_score_map(trained_mask.params, s.image, grid), s.mask)
                   for s in trained_mask.heldout]
    cl_scores = [centerline_scores(predict_score_map(trained_centerline.params, s.image, grid), s.centerline, 3)
                 for s in trained_centerline.heldout]
    d = float(np.mean([v.dice for v in mask_scores]))
    cl = float(np.mean([v.cl_dice for v in mask_scores]))
    tol = float(np.mean([v.dice for v in cl_scores]))
    ok = (d >= 0.85 and cl >= 0.80 and tol >= 0.80
          and trained_mask.seconds < 300 and trained_centerline.seconds < 300)
    report("6 end-to-end learning (16 held-out)", ok,
           f"mask dice={d:.3f} (>=0.85) clDice={cl:.3f} (>=0.80) train={trained_mask.seconds:.0f}s; "
           f"centerline tolerant dice={tol:.3f} (>=0.80) train={trained_centerline.seconds:.0f}s (<300s)")
    assert ok


def test_7_topology_fixtures(report):
    rng = np.random.default_rng(7)
    fixtures_ok = ((*betti_numbers(ring()), euler_characteristic(ring())) == (1, 1, 0)
                   and (*betti_numbers(square()), euler_characteristic(square())) == (1, 0, 1))
    mismatches = 0
    for _ in range(100):
        h, w = rng.integers(1, 33, size=2)
        m = (rng.uniform(size=(h, w)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        mismatches += euler_characteristic(m) != cell_complex_euler(m)
    ok = fixtures_ok and mismatches == 0
    report("7 topology fixtures + V-E+F oracle", ok,
           f"ring/square fixtures={'ok' if fixtures_ok else 'wrong'} euler mismatches={mismatches}/100")
    assert ok


def test_8_conversion_round_trip(report):
    rng = np.random.default_rng(8)
    failures = 0
    for _ in range(100):
        h, w = rng.integers(1, 33, size=2)
        m = (rng.uniform(size=(h, w)) < rng.uniform(0, 1)).astype(np.uint8)
        pts = [ScoredPoint(p.x, p.y, 1.0) for p in mask_to_points(m)]
        failures += not np.array_equal(threshold_map(rasterize(pts, h, w), 0.5), m)
    report("8 mask -> points -> rasterize -> threshold round trip", failures == 0,
           f"failures={failures}/100")
    assert failures == 0


def test_9_determinism(report, tmp_path):
    def run(tag):
        data, model = tmp_path / f"data_{tag}", tmp_path / f"model_{tag}"
        assert main(["synth", "--seed", "11", "--count", "8", "--out-dir", str(data)]) == 0
        assert main(["train", "--data-dir", str(data), "--out-dir", str(model), "--seed", "4",
                     "--iterations", "200"]) == 0
        pgms = {p.name: p.read_bytes() for p in sorted(data.glob("*.pgm"))}
        return pgms, (model / "model.bin").read_bytes(), (model / "history.csv").read_bytes()

    a, b = run("a"), run("b")
    synth_same, model_same = a[0] == b[0], a[1:] == b[1:]
    ok = synth_same and model_same
    report("9 determinism (synth + train bytes)", ok,
           f"synth identical={synth_same} ({len(a[0])} files) model+history identical={model_same}")
    assert ok
