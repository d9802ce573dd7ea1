from __future__ import annotations

import numpy as np

from ..errors import WrongChannelCount
from ..preprocessing import GRAY_WEIGHTS, register_transform


def luma_of(img) -> np.ndarray:
    """(H, W), (1, H, W) or (3, H, W) image -> float64 (H, W) luma in 0..255."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        return img[0].astype(np.float64)
    if img.ndim == 3 and img.shape[0] == 3:
        return np.tensordot(np.asarray(GRAY_WEIGHTS), img.astype(np.float64), axes=(0, 0))
    raise WrongChannelCount(f"expected 1 or 3 channels, got shape {img.shape}")


@register_transform("to_luma")
def to_luma(d, key: str = "image"):
    out = dict(d)
    out[key] = luma_of(d[key])[None]
    return out
