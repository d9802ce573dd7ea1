"""Double-quantization detector working directly on JPEG DCT coefficients.

A region that was compressed twice leaves a periodic comb in the histogram of
each AC frequency.  For every frequency whose histogram shows such a period we
compare, per block, the likelihood of the coefficient under the periodic
histogram against a smooth single-compression model and report the posterior
probability of the smooth (tampered) model.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..jpeg import ZIGZAG, blocks_view
from ..postprocessing import blocks_to_image, zero_one_rescale
from ..preprocessing import PipelineSpec
from .base import BaseMethod, MethodOutput, Param, positive, require

MIN_ENVELOPE = 5.0


def _is_int_in(lo, hi):
    return lambda x: isinstance(x, int) and not isinstance(x, bool) and lo <= x <= hi


def envelope(h: np.ndarray, p: int) -> np.ndarray:
    """Moving average of the histogram over one period, centred on each bin."""
    if p % 2:
        ker = np.ones(p) / p
    else:
        ker = np.r_[0.5, np.ones(p - 1), 0.5] / p
    return ndimage.convolve1d(h, ker, mode="constant")


def period_score(h: np.ndarray, vals: np.ndarray, p: int) -> float:
    """Two-sample z score of the normalized excess on multiples of ``p`` vs the rest."""
    env = envelope(h, p)
    ok = (env >= MIN_ENVELOPE) & (vals != 0)
    r = (h - env) / np.sqrt(np.maximum(env, 1e-12))
    peak = ok & (vals % p == 0)
    non = ok & (vals % p != 0)
    n_peak, n_non = int(peak.sum()), int(non.sum())
    if n_peak < 2 or n_non < 2:
        return 0.0
    var = r[ok].var()
    if var <= 0:
        return 0.0
    return float((r[peak].mean() - r[non].mean()) / np.sqrt(var * (1 / n_peak + 1 / n_non)))


def estimate_period(h: np.ndarray, vals: np.ndarray, max_period: int) -> tuple[int, float]:
    scores = [period_score(h, vals, p) for p in range(2, max_period + 1)]
    best = int(np.argmax(scores))
    return best + 2, scores[best]


def tamper_posterior(h: np.ndarray, vals: np.ndarray, p: int) -> np.ndarray:
    """Per-bin posterior of the single-compression model, equal priors."""
    env = envelope(h, p)
    start = np.floor((vals + p // 2) / p).astype(int) * p - p // 2
    lo = vals[0]
    i0 = np.clip(start - lo, 0, len(h))
    i1 = np.clip(start - lo + p, 0, len(h))
    ch = np.r_[0.0, np.cumsum(h)]
    ce = np.r_[0.0, np.cumsum(env)]
    p_unchanged = h / np.maximum(ch[i1] - ch[i0], 1e-12)
    p_tampered = env / np.maximum(ce[i1] - ce[i0], 1e-12)
    return p_tampered / np.maximum(p_tampered + p_unchanged, 1e-12)


def dq_block_map(coef: np.ndarray, n_frequencies=10, max_period=32, period_threshold=3.5):
    """Returns (block map or None, list of (zigzag index, period, score) for valid frequencies)."""
    by, bx = coef.shape[0] // 8, coef.shape[1] // 8
    blocks = blocks_view(np.asarray(coef, dtype=np.int64)[: by * 8, : bx * 8]).reshape(by, bx, 64)
    maps, found = [], []
    for k in range(1, n_frequencies + 1):
        c = blocks[..., ZIGZAG[k]]
        lo, hi = int(c.min()), int(c.max())
        if hi == lo:
            continue
        h = np.bincount((c - lo).ravel(), minlength=hi - lo + 1).astype(np.float64)
        vals = np.arange(lo, hi + 1)
        p, z = estimate_period(h, vals, max_period)
        if z < period_threshold:
            continue
        maps.append(tamper_posterior(h, vals, p)[c - lo])
        found.append((k, p, z))
    if not maps:
        return None, found
    return np.mean(maps, axis=0), found


class DQ(BaseMethod):
    name = "dq"
    output_types = ("heatmap",)
    params = {
        "n_frequencies": Param(10, _is_int_in(1, 63), "integer in 1..63"),
        "max_period": Param(32, _is_int_in(2, 256), "integer in 2..256"),
        "period_threshold": Param(3.5, positive, "positive number"),
    }

    @classmethod
    def pipeline(cls) -> PipelineSpec:
        return PipelineSpec(
            transforms=(),
            inputs=("dct_coefficients", "image_size"),
            outputs_keys=("dct_coefficients", "image_size"),
        )

    def predict(self, data) -> MethodOutput:
        require(data, "dct_coefficients", "image_size")
        coef = data["dct_coefficients"]
        if isinstance(coef, (list, tuple)) or np.ndim(coef) == 3:
            coef = coef[0]  # luma
        size = tuple(int(s) for s in data["image_size"])
        block_map, found = dq_block_map(np.asarray(coef), **self.config)
        if block_map is None:
            heatmap = np.zeros(size, dtype=np.float32)
        else:
            heatmap = blocks_to_image(zero_one_rescale(block_map), 8, size).astype(np.float32)
        periods = np.zeros(64, dtype=np.float32)
        for k, p, _ in found:
            periods[k] = p
        return MethodOutput(heatmap=heatmap, extra={"periods": periods})
