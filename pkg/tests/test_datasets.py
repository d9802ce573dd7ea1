import dataclasses
import json

import numpy as np
import pytest
from PIL import Image

import synth
from forgerybench.datasets import (
    DATASET_REGISTRY,
    DatasetDescriptor,
    LayoutAdapter,
    binarize_mask,
    get_descriptor,
    load_dataset,
)
from forgerybench.errors import (
    CountMismatch,
    DctRequestedForNonJpeg,
    IndexOutOfRange,
    LayoutMismatch,
    RootNotFound,
    ShapeMismatch,
)
from forgerybench.preprocessing import PipelineSpec, TransformSpec


def test_registry_names():
    assert set(DATASET_REGISTRY) == {
        "columbia", "casia1_sp", "casia1_cm", "coverage", "dso1", "korus", "autosplice", "trace",
    }
    assert DATASET_REGISTRY["columbia"].counts == (180, 183)


def test_binarize_rules():
    assert binarize_mask(np.array([[0, 255]], np.uint8)).tolist() == [[0, 1]]
    assert binarize_mask(np.array([[127, 128]], np.uint8)).tolist() == [[0, 1]]
    assert binarize_mask(np.array([[0, 64, 192]], np.uint8), "nonzero").tolist() == [[0, 1, 1]]
    assert binarize_mask(np.array([[0, 255]], np.uint8), "invert").tolist() == [[1, 0]]
    rgb = np.zeros((3, 1, 2), np.uint8)
    rgb[1, 0, 1] = 200
    assert binarize_mask(rgb, "channel:1").tolist() == [[0, 1]]
    gray_rgb = np.full((3, 1, 2), 128, np.uint8)
    assert binarize_mask(gray_rgb).tolist() == [[1, 1]]
    with pytest.raises(ShapeMismatch):
        binarize_mask(np.zeros((4, 4)), image_size=(4, 5))


def test_columbia_items(columbia_root):
    ds = load_dataset(get_descriptor("columbia", columbia_root))
    assert len(ds) == 363
    assert ds.names == sorted(ds.names)
    data, mask, name = ds[0]
    assert set(data) == {"image"} and name.startswith("4cam_auth/")
    assert mask.shape == data["image"].shape[-2:] and mask.sum() == 0
    data, mask, name = ds[len(ds) - 1]
    assert name.startswith("4cam_splc/") and mask.sum() == 7 * 9
    with pytest.raises(IndexOutOfRange):
        ds[363]
    with pytest.raises(DctRequestedForNonJpeg):
        load_dataset(get_descriptor("columbia", columbia_root), load=["image", "qtables"])[0]


def test_pipeline_determines_keys(columbia_root):
    p = PipelineSpec([TransformSpec("get_image_size")], ["image"], ["image", "image_size"])
    ds = load_dataset(get_descriptor("columbia", columbia_root), p, tampered_only=True, load=["qtables"])
    data, mask, _ = ds[0]
    assert set(data) == {"image", "image_size"} and data["image_size"] == mask.shape
    only_size = load_dataset(get_descriptor("columbia", columbia_root), load=["image_size"])
    assert set(only_size[0][0]) == {"image_size"}


def test_layout_errors(tmp_path, columbia_root):
    with pytest.raises(RootNotFound):
        load_dataset(get_descriptor("columbia", tmp_path / "absent"))
    with pytest.raises(LayoutMismatch):
        load_dataset(get_descriptor("columbia", tmp_path))
    desc = dataclasses.replace(get_descriptor("columbia", columbia_root), counts=(180, 100))
    with pytest.raises(CountMismatch):
        load_dataset(desc)


def jpeg_root(tmp_path):
    rng = np.random.default_rng(4)
    (tmp_path / "img").mkdir()
    (tmp_path / "gt").mkdir()
    for i in range(2):
        (tmp_path / "img" / f"f{i}.jpg").write_bytes(synth.encode_jpeg(rng.integers(0, 256, (30, 41)), 85))
        Image.fromarray(np.full((30, 41), 255 * i, np.uint8)).save(tmp_path / "gt" / f"f{i}_mask.png")
    return tmp_path


def test_json_descriptor_and_jpeg_keys(tmp_path):
    root = jpeg_root(tmp_path)
    cfg = {"name": "custom", "root": str(root), "image_glob": "img/*.jpg", "mask_glob": "gt/*.png",
           "mask_suffix": "_mask", "counts": [2, 0]}
    (tmp_path / "ds.json").write_text(json.dumps(cfg))
    desc = DatasetDescriptor.from_json(tmp_path / "ds.json")
    ds = load_dataset(desc, load=["image", "dct_coefficients", "qtables"])
    data, mask, name = ds[1]
    assert set(data) == {"image", "dct_coefficients", "qtables"}
    assert data["dct_coefficients"][0].shape == (32, 48)
    assert mask.all() and name == "img/f1.jpg"


def test_missing_mask_is_layout_mismatch(tmp_path):
    root = jpeg_root(tmp_path)
    (root / "gt" / "f1_mask.png").unlink()
    desc = DatasetDescriptor("x", root, LayoutAdapter("img/*.jpg", "gt/*.png", mask_suffix="_mask"))
    with pytest.raises(LayoutMismatch):
        load_dataset(desc)
