"""Helpers that shape raw method outputs into image-sized maps."""
from __future__ import annotations

import numpy as np

from .errors import DownscaleNotSupported, NonFiniteInput


def zero_one_rescale(h: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; constant inputs map to all zeros."""
    h = np.asarray(h, dtype=np.float64)
    if not np.isfinite(h).all():
        raise NonFiniteInput("zero_one_rescale: input contains NaN or inf")
    if h.size == 0:
        return h.copy()
    lo, hi = h.min(), h.max()
    if hi == lo:
        return np.zeros_like(h)
    return (h - lo) / (hi - lo)


def resize_with_trim_and_pad(h: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Crop or zero-pad at the bottom/right so the map has shape ``target``."""
    th, tw = target
    out = np.zeros((th, tw), dtype=h.dtype)
    ch, cw = min(th, h.shape[0]), min(tw, h.shape[1])
    out[:ch, :cw] = h[:ch, :cw]
    return out


def _check_upscale(shape, target):
    if target[0] < shape[0] or target[1] < shape[1]:
        raise DownscaleNotSupported(
            f"cannot upscale {tuple(shape)} to smaller {tuple(target)}; use resize_with_trim_and_pad"
        )


def nearest_upscale(a: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour enlargement; source index is ``floor(dst * S / T)``."""
    a = np.asarray(a)
    _check_upscale(a.shape, target)
    rows = (np.arange(target[0]) * a.shape[0]) // target[0]
    cols = (np.arange(target[1]) * a.shape[1]) // target[1]
    return a[rows[:, None], cols[None, :]]


def upscale_mask(m: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    return nearest_upscale((np.asarray(m) > 0).astype(np.uint8), target)


def simple_upscale_heatmap(h: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear enlargement with align-corners sampling, clamped to [0, 1]."""
    h = np.asarray(h, dtype=np.float64)
    _check_upscale(h.shape, target)

    def coords(src: int, dst: int):
        if dst == 1 or src == 1:
            pos = np.zeros(dst)
        else:
            pos = np.arange(dst) * (src - 1) / (dst - 1)
        i0 = np.floor(pos).astype(int)
        i1 = np.minimum(i0 + 1, src - 1)
        return i0, i1, pos - i0

    y0, y1, wy = coords(h.shape[0], target[0])
    x0, x1, wx = coords(h.shape[1], target[1])
    top = h[y0][:, x0] * (1 - wx) + h[y0][:, x1] * wx
    bottom = h[y1][:, x0] * (1 - wx) + h[y1][:, x1] * wx
    out = top * (1 - wy)[:, None] + bottom * wy[:, None]
    return np.clip(out, 0.0, 1.0)


def blocks_to_image(block_map: np.ndarray, block: int, image_size: tuple[int, int]) -> np.ndarray:
    """Expand a per-block map to pixels and fit it to ``image_size``."""
    by, bx = block_map.shape
    expanded = nearest_upscale(block_map, (by * block, bx * block))
    return resize_with_trim_and_pad(expanded, image_size)
