"""Acceptance suite.  A pass/fail line per criterion is printed in the terminal summary."""
import io
import json
import math
import re
import time

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

import synth
from forgerybench import benchmark as bench
from forgerybench.cli import main
from forgerybench.datasets import get_descriptor, load_dataset
from forgerybench.jpeg import dequantize_to_pixels, parse_jpeg
from forgerybench.methods import load_method
from forgerybench.metrics import (
    auroc,
    load_metrics,
    score,
    weighted_confusion,
)

RNG_SEED = 20240101


def naive_confusion(H, M):
    tp = fp = tn = fn = 0.0
    for i in range(H.shape[0]):
        for j in range(H.shape[1]):
            h, m = float(H[i, j]), float(M[i, j])
            tp += h * m
            fp += h * (1 - m)
            tn += (1 - h) * (1 - m)
            fn += (1 - h) * m
    return tp, fp, tn, fn


def naive_scores(tp, fp, tn, fn):
    def div(a, b):
        return a / b if b != 0 else 0.0

    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return {
        "f1": div(2 * tp, 2 * tp + fn + fp),
        "iou": div(tp, tp + fp + fn),
        "precision": div(tp, tp + fp),
        "tpr": div(tp, tp + fn),
        "fpr": div(fp, fp + tn),
        "mcc": (tp * tn - fp * fn) / math.sqrt(den) if den != 0 else 0.0,
    }


def random_pairs(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        h, w = rng.integers(1, 33, 2)
        H = rng.random((h, w))
        if rng.random() < 0.2:
            H = np.round(H)
        M = (rng.random((h, w)) < rng.random()).astype(np.uint8)
        yield H, M


def close(a, b, rel=1e-9, abs_=1e-12):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


@pytest.mark.criterion(1, "metric oracle equivalence (1000 random pairs)")
def test_metric_oracle_equivalence():
    t0 = time.perf_counter()
    for H, M in random_pairs(1000, RNG_SEED):
        c = weighted_confusion(H, M)
        ref = naive_confusion(H, M)
        for got, want in zip((c.tp, c.fp, c.tn, c.fn), ref):
            assert close(got, want)
        want_scores = naive_scores(*ref)
        for name, want in want_scores.items():
            assert close(score(c, name), want), name
    assert time.perf_counter() - t0 < 10


@pytest.mark.criterion(2, "partition identity")
def test_partition_identity():
    for H, M in random_pairs(1000, RNG_SEED):
        c = weighted_confusion(H, M)
        assert close(c.tp + c.fp + c.tn + c.fn, H.size)


@pytest.mark.criterion(3, "binary reduction")
def test_binary_reduction():
    rng = np.random.default_rng(RNG_SEED + 3)
    for _ in range(200):
        h, w = rng.integers(1, 33, 2)
        H = (rng.random((h, w)) < 0.5).astype(np.float64)
        M = (rng.random((h, w)) < 0.5).astype(np.uint8)
        tp = int(((H == 1) & (M == 1)).sum())
        fp = int(((H == 1) & (M == 0)).sum())
        tn = int(((H == 0) & (M == 0)).sum())
        fn = int(((H == 0) & (M == 1)).sum())
        want = naive_scores(tp, fp, tn, fn)
        c = weighted_confusion(H, M)
        for name in ("f1", "iou", "mcc"):
            assert score(c, name) == want[name]


@pytest.mark.criterion(4, "v1/v2 aggregation semantics")
def test_v1_v2_semantics():
    images = [(np.array([1.0]), np.array([1])), (np.full(4, 0.2), np.array([1, 0, 0, 0]))]
    v1, v2 = load_metrics(["f1_weighted_v1", "f1_weighted_v2"])
    for H, M in images:
        v1.update(H, M)
        v2.update(H, M)
    assert abs(v1.compute() - 0.611111) < 1e-6
    assert abs(v2.compute() - 0.631579) < 1e-6

    rng = np.random.default_rng(RNG_SEED + 4)
    for _ in range(100):
        n = int(rng.integers(2, 300))
        H, M = rng.random(n), (rng.random(n) < 0.4).astype(np.uint8)
        cuts = np.sort(rng.choice(np.arange(1, n), size=min(3, n - 1), replace=False))
        for name in ("f1", "iou", "mcc"):
            acc = load_metrics([f"{name}_weighted_v2"])[0]
            for h, m in zip(np.split(H, cuts), np.split(M, cuts)):
                acc.update(h, m)
            assert close(acc.compute(), score(weighted_confusion(H, M), name))


def pair_count_auroc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    total = 0.0
    for p in pos:
        total += np.sum(p > neg) + 0.5 * np.sum(p == neg)
    return total / (len(pos) * len(neg))


@pytest.mark.criterion(5, "AUROC oracle and worked examples")
def test_auroc():
    assert auroc([0.1, 0.9], [0, 1]) == 1.0
    assert auroc([0.5, 0.5], [0, 1]) == 0.5
    assert auroc([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1]) == 0.75
    rng = np.random.default_rng(RNG_SEED + 5)
    for _ in range(200):
        n = int(rng.integers(2, 200))
        s = rng.random(n)
        if rng.random() < 0.5:
            s = np.round(s * rng.integers(2, 10)) / 10  # many ties
        y = (rng.random(n) < 0.5).astype(int)
        y[0], y[1] = 0, 1
        assert close(auroc(s, y), pair_count_auroc(s, y))


def jpeg_corpus():
    rng = np.random.default_rng(RNG_SEED + 6)
    gray = synth.texture(rng, 203, 317, sigma=1.5)
    rgb = np.stack([synth.texture(rng, 120, 168, sigma=2.0) for _ in range(3)], axis=-1)
    out = []
    for q in (75, 90, 95, 100):
        out.append((f"gray_q{q}", synth.encode_jpeg(gray, q), q, "L"))
    out.append(("rgb444_q90", synth.encode_jpeg(rgb, 90, subsampling=0), 90, "444"))
    out.append(("rgb420_q75", synth.encode_jpeg(rgb, 75, subsampling=2), 75, "420"))
    out.append(("gray_q95_restart", synth.encode_jpeg(gray, 95, restart_marker_blocks=5), 95, "L"))
    return out


@pytest.mark.criterion(6, "JPEG coefficient parser vs reference decoder")
def test_jpeg_parser():
    t0 = time.perf_counter()
    corpus = jpeg_corpus()
    assert len(corpus) >= 5
    for name, data, q, kind in corpus:
        jd = parse_jpeg(data)
        ref = Image.open(io.BytesIO(data))
        if kind != "L":
            ref.draft("YCbCr", ref.size)
            ref = ref.convert("YCbCr") if ref.mode != "YCbCr" else ref
        ref = np.asarray(ref)
        if ref.ndim == 2:
            ref = ref[..., None]
        h, w = ref.shape[:2]
        channels = {"L": [0], "444": [0, 1, 2], "420": [0]}[kind]
        for ch in channels:
            pix = dequantize_to_pixels(jd.coefficients[ch], jd.component_qtable(ch))[:h, :w]
            diff = np.abs(pix.astype(int) - ref[..., ch].astype(int))
            assert diff.max() <= 1, (name, ch, diff.max())
        assert np.array_equal(jd.component_qtable(0), synth.ijg_table(synth.IJG_LUMA, q)), name
        if kind != "L":
            assert np.array_equal(jd.component_qtable(1), synth.ijg_table(synth.IJG_CHROMA, q)), name
    assert time.perf_counter() - t0 < 30


@pytest.fixture(scope="module")
def method_trials():
    t0 = time.perf_counter()
    dq, _ = load_method("dq")
    grid, _ = load_method("grid_align")
    noise, _ = load_method("noise_blocks")
    res = {k: [] for k in ("dq", "dq_ctrl", "grid", "grid_ctrl", "grid_noise", "noise", "noise_ctrl")}

    def dq_heatmap(data):
        jd = parse_jpeg(data)
        return dq.benchmark({"dct_coefficients": jd.coefficients, "image_size": (jd.height, jd.width)}).heatmap

    def pixels(method, img):
        return method.benchmark({"image": img[None], "image_size": img.shape})

    for seed in range(10):
        data, m = synth.dq_splice(seed)
        h = dq_heatmap(data)
        res["dq"].append(h[m].mean() > h[~m].mean())
        h = dq_heatmap(synth.dq_single(seed))
        blocks = h[: h.shape[0] // 64 * 64, : h.shape[1] // 64 * 64].reshape(h.shape[0] // 64, 64, -1, 64)
        worst = blocks.mean(axis=(1, 3)).max() - h.mean()
        res["dq_ctrl"].append(h.mean() >= 0.6 or worst > 0.3)

        pristine, forged, m = synth.grid_splice(seed)
        out = pixels(grid, forged)
        res["grid"].append(out.detection == 1 and synth.iou(out.mask, m) >= 0.3)
        res["grid_ctrl"].append(pixels(grid, pristine).detection == 1)
        wn = np.random.default_rng(seed).integers(0, 256, (256, 256)).astype(np.uint8)
        res["grid_noise"].append(pixels(grid, wn).detection == 1)

        pristine, forged, m = synth.noise_splice(seed)
        out = pixels(noise, forged)
        res["noise"].append(out.detection == 1 and synth.iou(out.mask, m) >= 0.3)
        res["noise_ctrl"].append(pixels(noise, pristine).detection == 1)
    res["elapsed"] = time.perf_counter() - t0
    return res


@pytest.mark.criterion(7, "method properties on seeded synthetic forgeries")
def test_dq_double_compression(method_trials):
    assert sum(method_trials["dq"]) >= 8
    assert sum(method_trials["dq_ctrl"]) <= 1


@pytest.mark.criterion(7, "method properties on seeded synthetic forgeries")
def test_grid_align_shifted_grid(method_trials):
    assert sum(method_trials["grid"]) >= 8
    assert sum(method_trials["grid_ctrl"]) <= 1
    assert sum(method_trials["grid_noise"]) <= 1


@pytest.mark.criterion(7, "method properties on seeded synthetic forgeries")
def test_noise_blocks_denoised_region(method_trials):
    assert sum(method_trials["noise"]) >= 8
    assert sum(method_trials["noise_ctrl"]) <= 1


@pytest.mark.criterion(7, "method properties on seeded synthetic forgeries")
def test_method_trials_runtime(method_trials):
    assert method_trials["elapsed"] < 300


class Interrupting:
    """Delegates to a method and raises KeyboardInterrupt once ``limit`` calls were made."""

    def __init__(self, method, limit=None):
        self.method = method
        self.name = method.name
        self.output_types = method.output_types
        self.limit = limit
        self.calls = 0

    def to_device(self, device):
        pass

    def benchmark(self, data):
        if self.limit is not None and self.calls >= self.limit:
            raise KeyboardInterrupt
        self.calls += 1
        return self.method.benchmark(data)


@pytest.fixture(scope="module")
def six_image_dataset(tmp_path_factory):
    import dataclasses

    root = synth.make_columbia(tmp_path_factory.mktemp("six"), 3, 3, size=(64, 72), seed=8)
    desc = dataclasses.replace(get_descriptor("columbia", root), counts=(3, 3))
    method, pipeline = load_method("noise_blocks")
    return method, load_dataset(desc, pipeline)


METRICS = ["f1", "f1_weighted_v1", "f1_weighted_v2", "iou_weighted_v2", "mcc_weighted_v2", "auroc", "mauroc"]


def read_reports(paths):
    return {p.name: p.read_bytes() for p in paths}


@pytest.mark.criterion(8, "benchmark determinism, resumability, report layout")
def test_benchmark_determinism_and_resume(six_image_dataset, tmp_path):
    method, ds = six_image_dataset
    assert len(ds) == 6
    first = bench.run(method, ds, METRICS, bench.BenchmarkConfig(tmp_path / "a", verbose=0))
    second = bench.run(method, ds, METRICS, bench.BenchmarkConfig(tmp_path / "b", verbose=0))
    assert read_reports(first) == read_reports(second)

    out = tmp_path / "c"
    cfg = bench.BenchmarkConfig(out, use_existing_output=True, verbose=0)
    with pytest.raises(KeyboardInterrupt):
        bench.run(Interrupting(method, limit=3), ds, METRICS, cfg)
    assert len(list((out / "noise_blocks" / "columbia" / "outputs").rglob("*.phz"))) == 3
    resumed = Interrupting(method)
    third = bench.run(resumed, ds, METRICS, cfg)
    assert resumed.calls == 3
    assert read_reports(third) == read_reports(first)

    cached = Interrupting(method)
    fourth = bench.run(cached, ds, METRICS, cfg)
    assert cached.calls == 0
    assert read_reports(fourth) == read_reports(first)

    pattern = re.compile(
        r"^noise_blocks/columbia/metrics/\d{8}T\d{6}_full/(mask|detection)_report\.json$"
    )
    for p in first:
        assert pattern.match(p.relative_to(tmp_path / "a").as_posix()), p
    report = json.loads(first[0].read_text())
    assert set(report) == {
        "method", "dataset", "dataset_mode", "output_type", "metrics",
        "images_evaluated", "images_skipped", "skip_reasons",
    }


@pytest.mark.criterion(9, "Columbia-layout fixture counts")
def test_columbia_counts(columbia_root):
    desc = get_descriptor("columbia", columbia_root)
    assert len(load_dataset(desc, tampered_only=False)) == 363
    assert len(load_dataset(desc, tampered_only=True)) == 180


@pytest.mark.criterion(10, "CLI golden tests")
def test_cli_golden(tmp_path):
    rng = np.random.default_rng(RNG_SEED + 10)
    img = tmp_path / "fixture.jpg"
    img.write_bytes(synth.encode_jpeg(synth.texture(rng, 72, 100), 90))
    out = tmp_path / "out"
    runner = CliRunner()
    res = runner.invoke(main, ["run", "dq", str(img), "--output-folder", str(out), "--overlay"])
    assert res.exit_code == 0, res.output
    for name in ("heatmap.png", "overlay.png"):
        with Image.open(out / "fixture" / name) as im:
            assert im.size == (100, 72)
    res = runner.invoke(main, ["run", "no_such_method", str(img)])
    assert res.exit_code == 2
    assert "dq" in res.output and "grid_align" in res.output
