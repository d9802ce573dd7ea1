"""Local noise-level inconsistency detector.

Noise is estimated per block from a Laplacian-like residual with a robust
(MAD) scale.  Blocks whose noise is far below that of blocks of similar
brightness are grouped into connected regions, and each region is validated
with a binomial a-contrario test on its one-block neighbourhood.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ImageTooSmall
from ..postprocessing import blocks_to_image
from ..preprocessing import PipelineSpec, TransformSpec
from .base import BaseMethod, MethodOutput, Param, positive, require
from .luma import luma_of
from .nfa import nfa

RESIDUAL_KERNEL = np.array([[1, -2, 1], [-2, 4, -2], [1, -2, 1]], dtype=np.float64) / 6.0
MAD_SCALE = 0.6745


def block_noise(img: np.ndarray, block=16):
    """Per-block noise sigma and mean intensity over the full blocks of the image."""
    img = np.asarray(img, dtype=np.float64)
    r = ndimage.correlate(img, RESIDUAL_KERNEL, mode="reflect")
    r[0, :] = r[-1, :] = np.nan
    r[:, 0] = r[:, -1] = np.nan
    by, bx = img.shape[0] // block, img.shape[1] // block

    def tiles(a):
        return a[: by * block, : bx * block].reshape(by, block, bx, block).transpose(0, 2, 1, 3)

    sigma = np.nanmedian(np.abs(tiles(r)).reshape(by, bx, -1), axis=-1) / MAD_SCALE
    mean = tiles(img).mean(axis=(2, 3))
    return sigma, mean


def bin_medians(sigma: np.ndarray, mean: np.ndarray, n_bins=8) -> np.ndarray:
    """Median sigma of each block's equal-count intensity bin."""
    edges = np.quantile(mean, np.linspace(0, 1, n_bins + 1)[1:-1])
    bins = np.searchsorted(edges, mean, side="right")
    med = np.zeros_like(sigma)
    for i in range(n_bins):
        sel = bins == i
        if sel.any():
            med[sel] = np.median(sigma[sel])
    return med


def detect_low_noise(sigma, mean, n_bins=8, ratio=0.5, epsilon=1.0):
    """Returns (block mask, list of (blocks, region size, below-median count, NFA))."""
    med = bin_medians(sigma, mean, n_bins)
    anomalous = sigma < ratio * med
    below = sigma < med
    labels, n_regions = ndimage.label(anomalous)
    mask = np.zeros(sigma.shape, bool)
    regions = []
    for i in range(1, n_regions + 1):
        comp = labels == i
        hood = ndimage.binary_dilation(comp, structure=np.ones((3, 3), bool))
        n = int(hood.sum())
        k = int((below & hood).sum())
        score = nfa(n_bins * n_regions, n, k, 0.5)
        regions.append((int(comp.sum()), n, k, score))
        if score < epsilon:
            mask |= comp
    return mask, regions


def _int_at_least(lo):
    return lambda x: isinstance(x, int) and not isinstance(x, bool) and x >= lo


class NoiseBlocks(BaseMethod):
    name = "noise_blocks"
    output_types = ("mask", "detection")
    params = {
        "block_size": Param(16, _int_at_least(4), "integer >= 4"),
        "n_bins": Param(8, _int_at_least(1), "integer >= 1"),
        "ratio": Param(0.5, lambda x: positive(x) and x < 1, "number in (0, 1)"),
        "nfa_epsilon": Param(1.0, positive, "positive number"),
    }

    @classmethod
    def pipeline(cls) -> PipelineSpec:
        return PipelineSpec(
            transforms=(TransformSpec("to_luma"), TransformSpec("get_image_size")),
            inputs=("image",),
            outputs_keys=("image", "image_size"),
        )

    def predict(self, data) -> MethodOutput:
        require(data, "image")
        img = luma_of(data["image"])
        b = self.config["block_size"]
        if img.shape[0] < 2 * b or img.shape[1] < 2 * b:
            raise ImageTooSmall(f"noise_blocks needs at least {2 * b}x{2 * b}, got {img.shape}")
        sigma, mean = block_noise(img, b)
        block_mask, _ = detect_low_noise(
            sigma, mean, self.config["n_bins"], self.config["ratio"], self.config["nfa_epsilon"]
        )
        mask = blocks_to_image(block_mask.astype(np.uint8), b, img.shape)
        return MethodOutput(
            mask=mask,
            detection=float(block_mask.any()),
            extra={"block_sigma": sigma.astype(np.float32)},
        )
