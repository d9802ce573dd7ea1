"""Synthetic forgeries and fixtures shared by the tests.

Every generator is seeded so that trial outcomes are reproducible.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

# IJG base tables in natural (row-major) order
IJG_LUMA = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
]).reshape(8, 8)
IJG_CHROMA = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
]).reshape(8, 8)


def ijg_table(base: np.ndarray, quality: int) -> np.ndarray:
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.clip((base * scale + 50) // 100, 1, 255)


def texture(rng, h, w, sigma=1.0, amp=40.0) -> np.ndarray:
    a = ndimage.gaussian_filter(rng.normal(0, 1, (h, w)), sigma)
    return np.clip(128 + a / a.std() * amp, 0, 255)


def to_u8(a) -> np.ndarray:
    return np.clip(np.round(a), 0, 255).astype(np.uint8)


def encode_jpeg(a, quality: int, **kw) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_u8(a)).save(buf, "JPEG", quality=quality, **kw)
    return buf.getvalue()


def decode(data: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(data))).astype(np.float64)


def dq_splice(seed: int, size=1024, region=384, q1=95, q2=75):
    """Background compressed at q1 then q2; an 8-aligned region compressed once at q2."""
    rng = np.random.default_rng(seed)
    bg = decode(encode_jpeg(texture(rng, size, size), q1))
    src = texture(rng, size, size)
    y0 = int(rng.integers(0, (size - region) // 8)) * 8
    x0 = int(rng.integers(0, (size - region) // 8)) * 8
    mask = np.zeros((size, size), bool)
    mask[y0 : y0 + region, x0 : x0 + region] = True
    bg[mask] = src[mask]
    return encode_jpeg(bg, q2), mask


def dq_single(seed: int, size=1024, quality=90) -> bytes:
    rng = np.random.default_rng(seed)
    return encode_jpeg(texture(rng, size, size), quality)


def grid_splice(seed: int, size=256, region=96):
    """Pristine JPEG-decoded image and a copy whose square region comes from another
    decoded JPEG shifted by (4, 4), so its block grid is misaligned."""
    rng = np.random.default_rng(seed)
    q = int(rng.integers(70, 91))
    pristine = decode(encode_jpeg(texture(rng, size, size), q))
    src = decode(encode_jpeg(texture(rng, size, size), q))
    y0 = 8 * int(rng.integers(1, (size - region) // 8))
    x0 = 8 * int(rng.integers(1, (size - region) // 8))
    mask = np.zeros((size, size), bool)
    mask[y0 : y0 + region, x0 : x0 + region] = True
    forged = pristine.copy()
    forged[y0 : y0 + region, x0 : x0 + region] = src[y0 - 4 : y0 + region - 4, x0 - 4 : x0 + region - 4]
    return to_u8(pristine), to_u8(forged), mask


def smooth_scene(rng, h, w) -> np.ndarray:
    y, x = np.mgrid[:h, :w] / h
    b = 60 + 120 * x + 30 * np.sin(6 * y + rng.uniform(0, 6))
    return b + ndimage.gaussian_filter(rng.normal(0, 1, (h, w)), 12) * 400


def noise_splice(seed: int, size=256, region=96, sigma=2.0, sigma_in=0.2):
    """Scene with homogeneous noise, and a copy where a rectangle has much less noise."""
    rng = np.random.default_rng(seed)
    base = smooth_scene(rng, size, size)
    pristine = to_u8(base + rng.normal(0, sigma, base.shape))
    y0, x0 = (int(v) for v in rng.integers(0, size - region, 2))
    mask = np.zeros((size, size), bool)
    mask[y0 : y0 + region, x0 : x0 + region] = True
    forged = to_u8(base + rng.normal(0, 1, base.shape) * np.where(mask, sigma_in, sigma))
    return pristine, forged, mask


def iou(a, b) -> float:
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    union = (a | b).sum()
    return float((a & b).sum() / union) if union else 1.0


def make_columbia(root: Path, n_forged=180, n_pristine=183, size=(16, 20), seed=0) -> Path:
    """Tiny stub images laid out like the Columbia release."""
    rng = np.random.default_rng(seed)
    splc = root / "4cam_splc"
    (splc / "edgemask").mkdir(parents=True, exist_ok=True)
    auth = root / "4cam_auth"
    auth.mkdir(parents=True, exist_ok=True)
    h, w = size
    for i in range(n_forged):
        Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).save(splc / f"canong3_splc_{i:03d}.tif")
        m = np.zeros((h, w, 3), np.uint8)
        m[2:9, 3:12] = 255
        Image.fromarray(m).save(splc / "edgemask" / f"canong3_splc_{i:03d}_edgemask.jpg", quality=100)
    for i in range(n_pristine):
        Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).save(auth / f"canong3_auth_{i:03d}.tif")
    return root
