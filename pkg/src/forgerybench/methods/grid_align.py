"""JPEG grid alignment detector.

Each 8x8 window is transformed with the DCT and scored by how many of its AC
coefficients are (near) zero.  Windows aligned with the compression grid score
highest, so every pixel votes for the grid origin of its best covering window.
Regions voting for an origin other than the global one are validated with an
a-contrario test.  Counts for the tests are taken on the 8-pixel lattice only,
where covering windows are disjoint and votes are independent under the null.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from ..errors import ImageTooSmall
from ..jpeg import dct_matrix
from ..preprocessing import PipelineSpec, TransformSpec
from .base import BaseMethod, MethodOutput, Param, positive, require
from .luma import luma_of
from .nfa import nfa

MIN_SIZE = 24
NO_VOTE = -1


def zero_counts(img: np.ndarray, threshold=0.5, rows=64) -> np.ndarray:
    """Near-zero AC count of the DCT of every 8x8 window; shape (H-7, W-7)."""
    D = dct_matrix()
    H, W = img.shape
    out = np.empty((H - 7, W - 7), np.int16)
    for y0 in range(0, H - 7, rows):
        y1 = min(H - 7, y0 + rows)
        win = sliding_window_view(img[y0 : y1 + 7], (8, 8))
        c = D @ win @ D.T
        z = np.abs(c) < threshold
        z[..., 0, 0] = False
        out[y0:y1] = z.sum(axis=(-1, -2))
    return out


def grid_votes(img: np.ndarray, threshold=0.5) -> np.ndarray:
    """Per-pixel voted grid origin ``oy * 8 + ox``; ``NO_VOTE`` on ties or empty counts."""
    H, W = img.shape
    Z = zero_counts(np.asarray(img, dtype=np.float64) - 128.0, threshold)
    padded = np.full((H + 7, W + 7), -1, np.int16)
    padded[7:H, 7:W] = Z
    best = np.full((H, W), -1, np.int16)
    arg = np.full((H, W), NO_VOTE, np.int16)
    ties = np.zeros((H, W), np.int16)
    ys = np.arange(H)[:, None]
    xs = np.arange(W)[None, :]
    for dy in range(8):
        for dx in range(8):
            # window with top-left (py - dy, px - dx)
            z = padded[7 - dy : 7 - dy + H, 7 - dx : 7 - dx + W]
            origin = (((ys - dy) % 8) * 8 + (xs - dx) % 8).astype(np.int16)
            gt = z > best
            eq = (z == best) & (z >= 0)
            ties = np.where(gt, 1, ties + eq)
            best = np.where(gt, z, best)
            arg = np.where(gt, origin, arg)
    arg[(ties > 1) | (best <= 0)] = NO_VOTE
    return arg


def lattice(shape) -> np.ndarray:
    lat = np.zeros(shape, bool)
    lat[::8, ::8] = True
    return lat


def detect_misaligned(votes: np.ndarray, epsilon=1.0):
    """Returns (mask, global origin or None, region origin map, list of region NFAs)."""
    lat = lattice(votes.shape)
    valid = votes >= 0
    mask = np.zeros(votes.shape, bool)
    origins = np.full(votes.shape, 255, np.uint8)
    lat_votes = votes[valid & lat]
    if lat_votes.size == 0:
        return mask, None, origins, []
    counts = np.bincount(lat_votes, minlength=64)
    modal = int(np.argmax(np.bincount(votes[valid], minlength=64)))
    if nfa(64, int(counts.sum()), int(counts[modal]), 1 / 64) >= epsilon:
        return mask, None, origins, []
    labels, n_regions = ndimage.label(valid & (votes != modal))
    found = []
    for i, sl in enumerate(ndimage.find_objects(labels), 1):
        region = labels[sl] == i
        on_lattice = region & lat[sl]
        n = int(on_lattice.sum())
        if n == 0:
            continue
        region_counts = np.bincount(votes[sl][on_lattice], minlength=64)
        k = int(region_counts.max())
        score = nfa(64 * n_regions, n, k, 1 / 64)
        if score < epsilon:
            mask[sl][region] = True
            origins[sl][region] = int(region_counts.argmax())
            found.append(score)
    return mask, modal, origins, found


class GridAlign(BaseMethod):
    name = "grid_align"
    output_types = ("mask", "detection")
    params = {
        "nfa_epsilon": Param(1.0, positive, "positive number"),
        "zero_threshold": Param(0.5, positive, "positive number"),
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
        if img.shape[0] < MIN_SIZE or img.shape[1] < MIN_SIZE:
            raise ImageTooSmall(f"grid_align needs at least {MIN_SIZE}x{MIN_SIZE}, got {img.shape}")
        votes = grid_votes(img, self.config["zero_threshold"])
        mask, _, origins, found = detect_misaligned(votes, self.config["nfa_epsilon"])
        extra = {
            "votes": np.where(votes >= 0, votes, 255).astype(np.uint8),
            "region_origin": origins,
        }
        return MethodOutput(mask=mask.astype(np.uint8), detection=float(bool(found)), extra=extra)
