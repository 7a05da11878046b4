"""Image error metrics, the temporal-flicker series, and image file IO.

Images are (height, width, 3) float32 arrays in linear radiance. PFM files
round-trip bit-exactly; PPM output is a tonemapped 8-bit preview only.
"""

import struct
from typing import NamedTuple

import numpy as np


class MetricRow(NamedTuple):
    frame: int
    metric: str
    value: float


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"image dimension mismatch: {a.shape} vs {b.shape}")


def mse(a, b):
    """Mean squared error over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def rel_mse(a, ref):
    """Relative MSE: mean of (a - ref)^2 / (ref^2 + 0.01) per channel."""
    a = np.asarray(a, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check_same_shape(a, ref)
    return float(np.mean((a - ref) ** 2 / (ref * ref + 0.01)))


def flicker_series(frames):
    """Temporal MSE between every pair of consecutive frames."""
    if len(frames) < 2:
        raise ValueError("flicker series needs at least 2 frames")
    return [
        MetricRow(i, "temporal_mse", mse(frames[i], frames[i + 1]))
        for i in range(len(frames) - 1)
    ]


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as f:
        f.write("frame,metric,value\n")
        for r in rows:
            f.write(f"{r.frame},{r.metric},{r.value!r}\n")


# ---------------------------------------------------------------------------
# PFM (rows stored bottom-to-top, little-endian float32, scale -1.0)

def write_pfm(img, path):
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("PFM writer expects an (H, W, 3) image")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(b"PF\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(img).astype("<f4").tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"PF":
            raise ValueError(f"not a color PFM file (magic {magic!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ValueError("malformed PFM dimensions line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        payload = f.read(w * h * 3 * 4)
        if len(payload) != w * h * 3 * 4:
            raise ValueError("truncated PFM payload")
        endian = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(payload, dtype=endian).reshape(h, w, 3)
        return np.flipud(data).astype(np.float32)


def write_ppm_tonemapped(img, path, exposure=1.0):
    """8-bit preview: clamp01(img * exposure) ** (1/2.2), rounded half-up."""
    if exposure <= 0:
        raise ValueError("exposure must be > 0")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    mapped = np.clip(img * exposure, 0.0, 1.0) ** (1.0 / 2.2)
    bytes_ = np.floor(mapped * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(bytes_.tobytes())
