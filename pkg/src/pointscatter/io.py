"""File formats: binary PGM rasters, JSON-lines point sets and the model blob.

Model blob layout (all integers little-endian)::

    8 bytes   magic  b"PSMODEL\\0"
    4 bytes   uint32 format version (currently 1)
    4 bytes   uint32 header length L
    L bytes   UTF-8 JSON header, keys sorted, no whitespace
    ...       payload: float64 little-endian arrays, C order, in header order

The header holds ``downsample``, ``points_per_region``, ``hidden``, the
optional training ``config`` and an ``arrays`` list of
``{"name", "shape", "offset", "nbytes"}`` entries (offsets relative to the
payload start).
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .core_types import ScoredPoint, as_mask, as_score_map
from .errors import ArtifactIOError, DimensionError, ParseError
from .model import PARAM_NAMES, ModelParams

MODEL_MAGIC = b"PSMODEL\0"
MODEL_VERSION = 1


def _write_bytes(path, data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc.strerror}") from exc


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc.strerror}") from exc


# --- PGM -------------------------------------------------------------------

def encode_pgm(values: np.ndarray) -> bytes:
    """Binary (P5) PGM with maxval 255 from a ``uint8`` array."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise DimensionError("PGM payload must be a 2-D uint8 array")
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def decode_pgm(data: bytes, source: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Parse a P5 PGM; returns ``(samples, maxval)``."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ParseError(f"{source}: truncated PGM header at offset {pos}")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise ParseError(f"{source}: expected magic P5, got {tokens[0]!r} at offset 0")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"{source}: malformed PGM header {tokens[1:]!r}") from exc
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise ParseError(f"{source}: invalid PGM dimensions or maxval ({w}x{h}, {maxval})")
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    need = w * h * dtype.itemsize
    if len(data) - pos < need:
        raise ParseError(f"{source}: raster needs {need} bytes at offset {pos}, found {len(data) - pos}")
    arr = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w)
    return arr.astype(np.uint8 if maxval < 256 else np.uint16), maxval


def quantize_scores(score_map) -> np.ndarray:
    """Scores in [0, 1] to 0..255, rounding half up."""
    s = as_score_map(score_map)
    return np.floor(s * 255.0 + 0.5).astype(np.uint8)


def write_mask_pgm(path, mask) -> None:
    _write_bytes(path, encode_pgm(as_mask(mask) * np.uint8(255)))


def write_score_pgm(path, score_map) -> None:
    _write_bytes(path, encode_pgm(quantize_scores(score_map)))


def read_mask_pgm(path) -> np.ndarray:
    raw, _ = decode_pgm(_read_bytes(path), str(path))
    return (raw > 0).astype(np.uint8)


def read_score_pgm(path) -> np.ndarray:
    raw, maxval = decode_pgm(_read_bytes(path), str(path))
    return raw.astype(np.float64) / maxval


# --- points ----------------------------------------------------------------

def encode_points(points) -> str:
    lines = [json.dumps({"x": float(p[0]), "y": float(p[1]), "score": float(p[2])}) for p in points]
    return "".join(line + "\n" for line in lines)


def write_points(path, points) -> None:
    _write_bytes(path, encode_points(points).encode("utf-8"))


def parse_points(text: str, source: str = "<text>") -> list[ScoredPoint]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source}:{lineno}: invalid JSON at column {exc.colno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(f"{source}:{lineno}: expected an object")
        for key in ("x", "y", "score"):
            if key not in obj:
                raise ParseError(f"{source}:{lineno}: missing field {key!r}")
            if not isinstance(obj[key], (int, float)) or isinstance(obj[key], bool):
                raise ParseError(f"{source}:{lineno}: field {key!r} is not a number")
        if not 0.0 <= obj["score"] <= 1.0:
            raise ParseError(f"{source}:{lineno}: score {obj['score']} outside [0, 1]")
        out.append(ScoredPoint(float(obj["x"]), float(obj["y"]), float(obj["score"])))
    return out


def read_points(path) -> list[ScoredPoint]:
    return parse_points(_read_bytes(path).decode("utf-8"), str(path))


# --- model -----------------------------------------------------------------

def encode_model(params: ModelParams, config: dict | None = None) -> bytes:
    entries = []
    payload = []
    offset = 0
    for name in PARAM_NAMES:
        arr = np.ascontiguousarray(getattr(params, name), dtype="<f8")
        raw = arr.tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        payload.append(raw)
        offset += len(raw)
    header = {
        "format_version": MODEL_VERSION,
        "downsample": params.downsample,
        "points_per_region": params.points_per_region,
        "hidden": params.hidden,
        "dtype": "<f8",
        "arrays": entries,
        "config": config or {},
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MODEL_MAGIC + struct.pack("<II", MODEL_VERSION, len(hbytes)) + hbytes + b"".join(payload)


def decode_model(data: bytes, source: str = "<bytes>") -> tuple[ModelParams, dict]:
    if data[:8] != MODEL_MAGIC:
        raise ParseError(f"{source}: bad magic at offset 0")
    if len(data) < 16:
        raise ParseError(f"{source}: truncated model header")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != MODEL_VERSION:
        raise ParseError(f"{source}: unsupported model format version {version}")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{source}: malformed JSON header at offset 16") from exc
    base = 16 + hlen
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        if start + entry["nbytes"] > len(data):
            raise ParseError(f"{source}: array {entry['name']} runs past end of file")
        arrays[entry["name"]] = np.frombuffer(
            data, dtype="<f8", count=entry["nbytes"] // 8, offset=start).reshape(entry["shape"]).astype(np.float64)
    params = ModelParams(header["downsample"], header["points_per_region"], header["hidden"], **arrays)
    params.validate()
    return params, header.get("config", {})


def write_model(path, params: ModelParams, config: dict | None = None) -> None:
    _write_bytes(path, encode_model(params, config))


def read_model(path) -> tuple[ModelParams, dict]:
    return decode_model(_read_bytes(path), str(path))


# --- tables ----------------------------------------------------------------

def write_csv(path, header, rows) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc.strerror}") from exc


def write_json(path, obj) -> None:
    _write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8"))
