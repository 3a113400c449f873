"""On-disk formats: CIFIELD binary dumps, ledger CSV, flat config, PPM.

CIFIELD v1: one ASCII header line
    CIFIELD v1 dim=<d> n_space=<N> n_time=<T> components=<c>
followed by raw little-endian float64 samples, component blocks in
order, each in time-major C order (time, axis 0, ..., axis d-1).
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

__all__ = [
    "write_cifield",
    "read_cifield",
    "write_ledger_csv",
    "parse_config",
    "write_ppm",
    "heatmap_ppm",
]

_MAGIC = "CIFIELD v1"


def write_cifield(path, arrays, dim: int, n_space: int, n_time: int) -> None:
    """Dump one or more component arrays of shape (n_time, n_space, ...)."""
    if isinstance(arrays, np.ndarray):
        arrays = [arrays]
    shape = (n_time,) + (n_space,) * dim
    for a in arrays:
        if a.shape != shape:
            raise ValueError(f"component shape {a.shape} != {shape}")
    header = f"{_MAGIC} dim={dim} n_space={n_space} n_time={n_time} components={len(arrays)}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_cifield(path):
    """Read a CIFIELD dump; returns (arrays, meta dict)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        parts = header.split()
        if " ".join(parts[:2]) != _MAGIC:
            raise ValueError(f"not a CIFIELD file: {header!r}")
        meta = {}
        for tok in parts[2:]:
            key, val = tok.split("=")
            meta[key] = int(val)
        shape = (meta["n_time"],) + (meta["n_space"],) * meta["dim"]
        count = int(np.prod(shape))
        arrays = []
        for _ in range(meta["components"]):
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError("truncated CIFIELD payload")
            arrays.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    return arrays, meta


def write_ledger_csv(path, rows: list[dict]) -> None:
    """CSV with iteration,name,value first, then any parameter columns."""
    lead = ["iteration", "name", "value"]
    extra = []
    for row in rows:
        for key in row:
            if key not in lead and key not in extra:
                extra.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=lead + extra)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def parse_config(text: str) -> dict:
    """Flat `key = value` lines with # comments; values kept as strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def write_ppm(path, rgb: np.ndarray) -> None:
    """Binary P6 image from an (h, w, 3) uint8 array."""
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def _colormap(v: np.ndarray) -> np.ndarray:
    """Symmetric blue-white-red map on [-1, 1]."""
    v = np.clip(v, -1.0, 1.0)
    r = np.where(v >= 0, 255, (1 + v) * 255)
    b = np.where(v <= 0, 255, (1 - v) * 255)
    g = (1 - np.abs(v)) * 255
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def heatmap_ppm(path, plane: np.ndarray) -> None:
    """Dump a 2-D sample plane as a diverging-colormap PPM."""
    scale = np.max(np.abs(plane))
    v = plane / scale if scale > 0 else plane
    write_ppm(path, _colormap(v))


def loglog_scatter_ppm(path, xs, ys, size: int = 256) -> None:
    """Crude log-log scatter rasterized straight into a PPM."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = (xs > 0) & (ys > 0)
    xs, ys = np.log(xs[good]), np.log(ys[good])
    img = np.full((size, size, 3), 255, np.uint8)
    if len(xs):
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ys.min(), ys.max()
        sx = (size - 17) / (x1 - x0 if x1 > x0 else 1.0)
        sy = (size - 17) / (y1 - y0 if y1 > y0 else 1.0)
        for x, y in zip(xs, ys):
            col = 8 + int((x - x0) * sx)
            row = size - 9 - int((y - y0) * sy)
            img[max(row - 2, 0) : row + 3, max(col - 2, 0) : col + 3] = (200, 30, 30)
    write_ppm(path, img)
