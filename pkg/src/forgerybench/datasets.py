"""Dataset enumeration and loading.

A dataset folder is described declaratively by a :class:`LayoutAdapter`: glob
patterns for forged images, their masks and pristine images, plus suffixes
stripped from file stems so that each forged image can be paired with its
mask.  Known datasets ship as named adapters; others can be loaded from JSON.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import image_io
from .errors import (
    CountMismatch,
    DctRequestedForNonJpeg,
    IndexOutOfRange,
    LayoutMismatch,
    RootNotFound,
    ShapeMismatch,
)
from .preprocessing import GRAY_WEIGHTS, DataMap, PipelineSpec

LOADABLE_KEYS = ("image", "dct_coefficients", "qtables", "image_size")
JPEG_KEYS = ("dct_coefficients", "qtables")


def _patterns(p) -> tuple[str, ...]:
    if p is None:
        return ()
    if isinstance(p, str):
        return (p,)
    return tuple(p)


@dataclass(frozen=True)
class LayoutAdapter:
    image_glob: tuple[str, ...]
    mask_glob: tuple[str, ...] = ()
    pristine_glob: tuple[str, ...] = ()
    image_suffix: str = ""
    mask_suffix: str = ""

    def __post_init__(self):
        for name in ("image_glob", "mask_glob", "pristine_glob"):
            object.__setattr__(self, name, _patterns(getattr(self, name)))

    @staticmethod
    def _key(path: Path, suffix: str) -> str:
        stem = path.stem
        if suffix and stem.endswith(suffix):
            stem = stem[: -len(suffix)]
        return stem

    @staticmethod
    def _glob(root: Path, patterns) -> list[Path]:
        found = set()
        for pat in patterns:
            found.update(p for p in root.glob(pat) if p.is_file())
        return sorted(found, key=lambda p: p.relative_to(root).as_posix())

    def enumerate(self, root: Path):
        """Returns (forged [(image, mask)], pristine [image]) sorted by relative path."""
        forged = self._glob(root, self.image_glob)
        forged_set = set(forged)
        pristine = [p for p in self._glob(root, self.pristine_glob) if p not in forged_set]
        masks = {}
        for m in self._glob(root, self.mask_glob):
            masks.setdefault(self._key(m, self.mask_suffix), m)
        pairs, missing = [], []
        for img in forged:
            m = masks.get(self._key(img, self.image_suffix))
            if m is None:
                missing.append(img.relative_to(root).as_posix())
            pairs.append((img, m))
        if missing:
            raise LayoutMismatch(
                f"{len(missing)} forged image(s) have no mask, e.g. {missing[0]!r}"
            )
        return pairs, pristine

    def to_dict(self) -> dict[str, Any]:
        return {
            "image_glob": list(self.image_glob),
            "mask_glob": list(self.mask_glob),
            "pristine_glob": list(self.pristine_glob),
            "image_suffix": self.image_suffix,
            "mask_suffix": self.mask_suffix,
        }


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    root: Path
    layout: LayoutAdapter
    counts: tuple[int, int] | None = None
    mask_rule: str = "luma"

    @classmethod
    def from_dict(cls, d: dict[str, Any], root=None) -> "DatasetDescriptor":
        layout = LayoutAdapter(
            image_glob=d["image_glob"],
            mask_glob=d.get("mask_glob", ()),
            pristine_glob=d.get("pristine_glob", ()),
            image_suffix=d.get("image_suffix", ""),
            mask_suffix=d.get("mask_suffix", ""),
        )
        counts = d.get("counts")
        return cls(
            name=d["name"],
            root=Path(root if root is not None else d["root"]),
            layout=layout,
            counts=tuple(counts) if counts is not None else None,
            mask_rule=d.get("mask_rule", "luma"),
        )

    @classmethod
    def from_json(cls, path, root=None) -> "DatasetDescriptor":
        return cls.from_dict(json.loads(Path(path).read_text()), root)


# Folder trees follow the public releases as distributed; CountMismatch flags drift.
DATASET_REGISTRY: dict[str, DatasetDescriptor] = {}


def register_dataset(name, layout: LayoutAdapter, counts=None, mask_rule="luma"):
    if name in DATASET_REGISTRY:
        raise ValueError(f"dataset {name!r} registered twice")
    DATASET_REGISTRY[name] = DatasetDescriptor(name, Path("."), layout, counts, mask_rule)


register_dataset(
    "columbia",
    LayoutAdapter("4cam_splc/*.tif", "4cam_splc/edgemask/*_edgemask.jpg", "4cam_auth/*.tif",
                  mask_suffix="_edgemask"),
    counts=(180, 183),
)
register_dataset(
    "casia1_sp",
    LayoutAdapter("Modified Tp/Tp/Sp/*.jpg", "CASIA 1.0 groundtruth/Sp/*_gt.png", "Au/*.jpg",
                  mask_suffix="_gt"),
)
register_dataset(
    "casia1_cm",
    LayoutAdapter("Modified Tp/Tp/CM/*.jpg", "CASIA 1.0 groundtruth/CM/*_gt.png", "Au/*.jpg",
                  mask_suffix="_gt"),
)
register_dataset(
    "coverage",
    LayoutAdapter("image/*t.tif", "mask/*forged.tif", "image/*[0-9].tif",
                  image_suffix="t", mask_suffix="forged"),
    counts=(100, 100),
)
register_dataset(
    "dso1",
    LayoutAdapter("images/splicing-*.png", "masks/splicing-*.png", "images/normal-*.png"),
    counts=(100, 100),
)
register_dataset(
    "korus",
    LayoutAdapter("tampered-realistic/*.TIF", "tampered-realistic/ground-truth/*.PNG", "pristine/*.TIF"),
    counts=(220, 220),
    mask_rule="nonzero",
)
register_dataset(
    "autosplice",
    LayoutAdapter("Forged_JPEG100/*.jpg", "Mask/*_mask.png", "Authentic/*.jpg", mask_suffix="_mask"),
    counts=(3621, 2273),
)
register_dataset(
    "trace",
    LayoutAdapter("images/*.png", "masks/*.png"),
    counts=(24000, 0),
)


def available_datasets() -> list[str]:
    return sorted(DATASET_REGISTRY)


def get_descriptor(name: str, root) -> DatasetDescriptor:
    try:
        d = DATASET_REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown dataset {name!r}; available: {', '.join(available_datasets())}"
        ) from None
    return replace(d, root=Path(root))


def binarize_mask(raw, rule: str = "luma", image_size=None) -> np.ndarray:
    """Binary uint8 mask from a decoded ground-truth image.

    Rules: ``luma`` (luma > 127), ``invert`` (luma <= 127), ``nonzero`` (any
    channel non-zero) and ``channel:N`` (channel N > 127).
    """
    raw = np.asarray(raw)
    if raw.ndim == 2:
        raw = raw[None]
    if image_size is not None and tuple(raw.shape[-2:]) != tuple(image_size):
        raise ShapeMismatch(f"mask size {raw.shape[-2:]} != image size {tuple(image_size)}")

    def luma():
        if raw.shape[0] == 3:
            return np.rint(np.tensordot(np.asarray(GRAY_WEIGHTS), raw.astype(np.float64), axes=(0, 0)))
        return raw[0]

    if rule == "luma":
        m = luma() > 127
    elif rule == "invert":
        m = luma() <= 127
    elif rule == "nonzero":
        m = (raw != 0).any(axis=0)
    elif rule.startswith("channel:"):
        m = raw[int(rule.split(":", 1)[1])] > 127
    else:
        raise ValueError(f"unknown mask rule {rule!r}")
    return m.astype(np.uint8)


@dataclass(frozen=True)
class Entry:
    name: str
    image: Path
    mask: Path | None


@dataclass(frozen=True)
class Dataset:
    descriptor: DatasetDescriptor
    entries: tuple[Entry, ...]
    keys: tuple[str, ...]
    pipeline: PipelineSpec | None = None
    n_forged: int = 0
    n_pristine: int = 0
    tampered_only: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def __getitem__(self, index: int):
        if not isinstance(index, (int, np.integer)) or not 0 <= index < len(self):
            raise IndexOutOfRange(f"index {index} out of range for dataset of length {len(self)}")
        e = self.entries[index]
        data: DataMap = {}
        if any(k in JPEG_KEYS for k in self.keys) and not image_io.is_jpeg(e.image):
            raise DctRequestedForNonJpeg(f"{e.name}: DCT data requested for a non-JPEG image")
        if "image" in self.keys:
            data["image"] = image_io.read_image(e.image)
            size = data["image"].shape[-2:]
        else:
            size = image_io.image_size(e.image)
        if any(k in JPEG_KEYS for k in self.keys):
            coef, qtables = image_io.read_jpeg_data(e.image)
            if "dct_coefficients" in self.keys:
                data["dct_coefficients"] = coef
            if "qtables" in self.keys:
                data["qtables"] = qtables
        if "image_size" in self.keys:
            data["image_size"] = (int(size[0]), int(size[1]))
        if e.mask is None:
            mask = np.zeros(tuple(size), np.uint8)
        else:
            mask = binarize_mask(image_io.read_image(e.mask), self.descriptor.mask_rule, size)
        if self.pipeline is not None:
            data = self.pipeline(data)
        return data, mask, e.name


def load_dataset(
    descriptor: DatasetDescriptor,
    pipeline: PipelineSpec | None = None,
    tampered_only: bool = False,
    load: Sequence[str] = ("image",),
) -> Dataset:
    root = Path(descriptor.root)
    if not root.is_dir():
        raise RootNotFound(f"dataset root {str(root)!r} does not exist")
    keys = tuple(pipeline.inputs) if pipeline is not None else tuple(load)
    if not keys:
        raise ValueError("load keys must be non-empty")
    unknown = [k for k in keys if k not in LOADABLE_KEYS]
    if unknown:
        raise ValueError(f"cannot load key(s) {unknown}; loadable: {list(LOADABLE_KEYS)}")
    forged, pristine = descriptor.layout.enumerate(root)
    if not forged and not pristine:
        raise LayoutMismatch(f"no images of the {descriptor.name!r} layout found under {str(root)!r}")
    if descriptor.counts is not None and (len(forged), len(pristine)) != tuple(descriptor.counts):
        raise CountMismatch(
            f"{descriptor.name}: found {len(forged)} forged + {len(pristine)} pristine, "
            f"expected {descriptor.counts[0]} + {descriptor.counts[1]}"
        )
    rel = lambda p: p.relative_to(root).as_posix()  # noqa: E731
    entries = [Entry(rel(img), img, m) for img, m in forged]
    if not tampered_only:
        entries += [Entry(rel(p), p, None) for p in pristine]
    entries.sort(key=lambda e: e.name)
    return Dataset(descriptor, tuple(entries), keys, pipeline, len(forged), len(pristine), tampered_only)
