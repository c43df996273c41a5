"""Command-line entry point: ``pointscatter <command> [options]``.

Commands: synth, train, predict, eval, bench-match, convert. Errors exit
with the category code carried by the raised :mod:`pointscatter.errors`
class; ``POINTSCATTER_THREADS`` sets the default BLAS thread count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, io, metrics
from .bench import BenchLayout, benchmark
from .convert import filter_by_score, mask_to_points, rasterize, threshold_map
from .core_types import ScoredPoint, make_grid
from .errors import ArtifactIOError, PairingError, ParameterError, PointScatterError
from .model import TrainConfig, forward, train
from .synth import SynthParams, SyntheticSample, generate_sample

log = logging.getLogger("pointscatter")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(command: str, config: dict, seed, files, timings: dict) -> dict:
    return {
        "tool": "pointscatter",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "files": [{"path": p.name, "sha256": _sha256(p)} for p in files],
        "timings": timings,
    }


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("POINTSCATTER_THREADS", "1"))


# --- synth -----------------------------------------------------------------

def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    params = SynthParams(height=args.size, width=args.size, n_branches=args.branches,
                         width_range=(args.width_min, args.width_max), noise=args.noise,
                         downsample=args.downsample)
    t0 = time.perf_counter()
    files = []
    for k in range(args.count):
        s = generate_sample(args.seed + k, params)
        for name, write, arr in (("image", io.write_score_pgm, s.image),
                                 ("mask", io.write_mask_pgm, s.mask),
                                 ("centerline", io.write_mask_pgm, s.centerline)):
            path = out / f"{name}_{k}.pgm"
            write(path, arr)
            files.append(path)
    config = {**params.as_dict(), "count": args.count, "rng": "numpy PCG64, seed + k per sample"}
    io.write_json(out / "manifest.json",
                  _manifest("synth", config, args.seed, files, {"seconds": time.perf_counter() - t0}))
    print(f"wrote {len(files)} PGM files to {out}")
    return 0


def load_dataset(directory, limit: int | None = None) -> list[SyntheticSample]:
    d = Path(directory)
    if not d.is_dir():
        raise ArtifactIOError(f"dataset directory {d} does not exist")
    ids = sorted(int(m.group(1)) for p in d.glob("image_*.pgm")
                 if (m := re.fullmatch(r"image_(\d+)\.pgm", p.name)))
    if limit is not None:
        ids = ids[:limit]
    samples = []
    for k in ids:
        samples.append(SyntheticSample(io.read_score_pgm(d / f"image_{k}.pgm"),
                                       io.read_mask_pgm(d / f"mask_{k}.pgm"),
                                       io.read_mask_pgm(d / f"centerline_{k}.pgm")))
    if not samples:
        raise ArtifactIOError(f"no image_*.pgm files in {d}")
    return samples


# --- train -----------------------------------------------------------------

_TRAIN_FLAGS = {
    "downsample": int, "points_per_region": int, "eta": float, "lam": float, "alpha": float,
    "gamma": float, "threshold": float, "hidden": int, "lr": float, "momentum": float,
    "schedule": str, "iterations": int, "batch_size": int, "seed": int, "target": str, "matcher": str,
}


def cmd_train(args) -> int:
    overrides = {k: getattr(args, k) for k in _TRAIN_FLAGS if getattr(args, k) is not None}
    if "alpha" not in overrides and overrides.get("target") == "centerline":
        overrides["alpha"] = 0.7
    config = TrainConfig(**overrides)
    samples = load_dataset(args.data_dir, args.limit)
    t0 = time.perf_counter()
    params, history = train(samples, config)
    elapsed = time.perf_counter() - t0
    out = Path(args.out_dir)
    model_path = out / "model.bin"
    io.write_model(model_path, params, config.as_dict())
    hist_path = out / "history.csv"
    io.write_csv(hist_path, ["step", "objectness", "regression", "total", "gt_count"],
                 [[i, repr(h.objectness), repr(h.regression), repr(h.total), h.gt_count]
                  for i, h in enumerate(history)])
    io.write_json(out / "manifest.json", _manifest(
        "train", {**config.as_dict(), "data_dir": str(args.data_dir), "samples": len(samples)},
        config.seed, [model_path, hist_path], {"seconds": elapsed}))
    print(f"trained {config.iterations} steps; loss {history[0].total:.4f} -> {history[-1].total:.4f}"
          if history else "trained 0 steps")
    return 0


# --- predict ---------------------------------------------------------------

def cmd_predict(args) -> int:
    params, config = io.read_model(args.model)
    image = io.read_score_pgm(args.image)
    threshold = args.threshold if args.threshold is not None else config.get("threshold", 0.1)
    grid = make_grid(image.shape[0], image.shape[1], params.downsample)
    out = forward(params, image, grid)
    flat = [ScoredPoint(float(x), float(y), float(s))
            for (x, y), s in zip(out.points.reshape(-1, 2), out.scores.ravel())]
    kept = filter_by_score(flat, threshold)
    d = Path(args.out_dir)
    io.write_points(d / "points.jsonl", kept)
    io.write_score_pgm(d / "scoremap.pgm", rasterize(kept, *image.shape))
    io.write_json(d / "manifest.json", _manifest(
        "predict", {"model": str(args.model), "image": str(args.image), "threshold": threshold},
        config.get("seed"), [d / "points.jsonl", d / "scoremap.pgm"], {}))
    print(f"{len(kept)} points at threshold {threshold}")
    return 0


# --- eval ------------------------------------------------------------------

def _expand(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        out.extend(sorted(p.glob("*.pgm")) if p.is_dir() else [p])
    return out


def _finite(x: float):
    return None if x != x else x


def cmd_eval(args) -> int:
    preds, gts = _expand(args.pred), _expand(args.gt)
    if len(preds) != len(gts) or not preds:
        raise PairingError(f"{len(preds)} prediction files vs {len(gts)} ground-truth files")
    per_image = []
    bin_preds, gt_masks = [], []
    for p, g in zip(preds, gts):
        score = io.read_score_pgm(p)
        gt = io.read_mask_pgm(g)
        if args.centerline:
            vol = metrics.centerline_scores(score, gt, args.tolerance, args.threshold)
        else:
            vol = metrics.volumetric_scores(score, gt, args.threshold)
        pred_mask = threshold_map(score, args.threshold)
        topo = metrics.topology_errors([pred_mask], [gt])
        per_image.append({"pred": str(p), "gt": str(g),
                          **{k: _finite(v) for k, v in vol.as_dict().items()}, **topo.as_dict()})
        bin_preds.append(pred_mask)
        gt_masks.append(gt)
    keys = [k for k in per_image[0] if k not in ("pred", "gt")]
    mean = {}
    for k in keys:
        vals = [r[k] for r in per_image if r[k] is not None]
        mean[k] = float(np.mean(vals)) if vals else None
    mean.update(metrics.topology_errors(bin_preds, gt_masks).as_dict())
    report = {"mode": "centerline" if args.centerline else "segmentation",
              "threshold": args.threshold, "tolerance": args.tolerance if args.centerline else None,
              "per_image": per_image, "mean": mean}
    if args.out:
        io.write_json(args.out, report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# --- bench -----------------------------------------------------------------

def cmd_bench_match(args) -> int:
    from threadpoolctl import threadpool_limits

    sizes = [int(s) for s in args.image_sizes.split(",") if s]
    threads = _threads(args)
    layout = BenchLayout()
    with threadpool_limits(limits=threads):
        rows = benchmark(sizes, args.downsample, args.n, args.batch, args.repeats, args.seed, layout)
    cols = ["image_size", "method", "seconds", "speedup", "total_cost", "optimality_gap",
            "regions", "nonempty_regions"]
    out = Path(args.out)
    io.write_csv(out, cols, [[r[c] for c in cols] for r in rows])
    config = {"image_sizes": sizes, "downsample": args.downsample, "n": args.n, "batch": args.batch,
              "repeats": args.repeats, "threads": threads,
              "layout": {"branches_per_48px": layout.branches_per_48px,
                         "width_range": list(layout.width_range),
                         "offset_spread": layout.offset_spread, "score": "uniform(0, 1)", "eta": 0.8}}
    io.write_json(out.with_suffix(".manifest.json"), _manifest("bench-match", config, args.seed, [out], {}))
    for r in rows:
        print(f"{r['image_size']:>5} {r['method']:<9} {r['seconds']:.4f}s speedup {r['speedup']:.1f}x "
              f"gap {r['optimality_gap']:.4f}")
    return 0


# --- convert ---------------------------------------------------------------

def cmd_convert(args) -> int:
    if args.mode == "mask2points":
        mask = io.read_mask_pgm(args.input)
        io.write_points(args.output, [ScoredPoint(p.x, p.y, 1.0) for p in mask_to_points(mask)])
    else:
        if args.height is None or args.width is None:
            raise ParameterError("points2mask needs --height and --width")
        pts = io.read_points(args.input)
        io.write_mask_pgm(args.output, threshold_map(rasterize(pts, args.height, args.width), args.threshold))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointscatter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic tubular dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--branches", type=int, default=3)
    p.add_argument("--width-min", type=int, default=1)
    p.add_argument("--width-max", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--downsample", type=int, default=4)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the point predictor")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--limit", type=int, help="use only the first LIMIT samples")
    for name, typ in _TRAIN_FLAGS.items():
        flag = "--points" if name == "points_per_region" else "--" + name.replace("_", "-")
        p.add_argument(flag, dest=name, type=typ)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict points and a score map for one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", nargs="+", required=True, help="score-map PGMs or directories")
    p.add_argument("--gt", nargs="+", required=True, help="mask PGMs or directories")
    p.add_argument("--centerline", action="store_true")
    p.add_argument("--tolerance", type=float, default=3.0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-match", help="time batched greedy against per-region Hungarian")
    p.add_argument("--image-sizes", default="384,768,1024")
    p.add_argument("--downsample", type=int, default=4)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(func=cmd_bench_match)

    p = sub.add_parser("convert", help="convert between masks and point sets")
    p.add_argument("--mode", choices=["mask2points", "points2mask"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PointScatterError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
