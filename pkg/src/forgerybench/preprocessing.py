"""Dictionary-in / dictionary-out transforms and the pipeline that chains them.

A transform is described by a :class:`TransformSpec` (a kind name plus
parameters) so that pipelines serialize to JSON.  Methods may register their
own kinds with :func:`register_transform`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import (
    MissingInputKey,
    MissingKey,
    MissingOutputKey,
    UnknownTransform,
    WrongChannelCount,
    ZeroStd,
)

DataMap = dict[str, Any]

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

_TRANSFORMS: dict[str, Callable[..., DataMap]] = {}


def register_transform(kind: str):
    def deco(fn):
        if kind in _TRANSFORMS:
            raise ValueError(f"transform {kind!r} registered twice")
        _TRANSFORMS[kind] = fn
        return fn

    return deco


def available_transforms() -> list[str]:
    return sorted(_TRANSFORMS)


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TransformSpec":
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, d)


def _image(d: DataMap, key: str = "image") -> np.ndarray:
    if key not in d:
        raise MissingKey(f"transform requires key {key!r}")
    return np.asarray(d[key])


@register_transform("zero_one_range")
def zero_one_range(d: DataMap, key: str = "image") -> DataMap:
    out = dict(d)
    out[key] = _image(d, key).astype(np.float64) / 255.0
    return out


@register_transform("normalize")
def normalize(d: DataMap, mean, std, key: str = "image") -> DataMap:
    img = _image(d, key).astype(np.float64)
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    std = np.atleast_1d(np.asarray(std, dtype=np.float64))
    if (std == 0).any():
        raise ZeroStd("normalize: standard deviation entries must be non-zero")
    shape = (-1,) + (1,) * (img.ndim - 1)
    out = dict(d)
    out[key] = (img - mean.reshape(shape)) / std.reshape(shape)
    return out


@register_transform("rgb_to_gray")
def rgb_to_gray(d: DataMap, key: str = "image") -> DataMap:
    img = _image(d, key)
    if img.ndim != 3 or img.shape[0] != 3:
        raise WrongChannelCount(f"rgb_to_gray expects 3 channels, got shape {img.shape}")
    w = np.asarray(GRAY_WEIGHTS)
    out = dict(d)
    out[key] = np.tensordot(w, img.astype(np.float64), axes=(0, 0))[None]
    return out


@register_transform("gray_to_rgb")
def gray_to_rgb(d: DataMap, key: str = "image") -> DataMap:
    img = _image(d, key)
    if img.ndim != 3 or img.shape[0] != 1:
        raise WrongChannelCount(f"gray_to_rgb expects 1 channel, got shape {img.shape}")
    out = dict(d)
    out[key] = np.repeat(img, 3, axis=0)
    return out


@register_transform("round_to_uint")
def round_to_uint(d: DataMap, key: str = "image") -> DataMap:
    img = _image(d, key).astype(np.float64)
    # half away from zero, unlike np.round's half-to-even
    rounded = np.sign(img) * np.floor(np.abs(img) + 0.5)
    out = dict(d)
    out[key] = np.clip(rounded, 0, 255).astype(np.uint8)
    return out


@register_transform("get_image_size")
def get_image_size(d: DataMap, key: str = "image") -> DataMap:
    img = _image(d, key)
    out = dict(d)
    out["image_size"] = (int(img.shape[-2]), int(img.shape[-1]))
    return out


def apply_transform(t: TransformSpec, d: DataMap) -> DataMap:
    try:
        fn = _TRANSFORMS[t.kind]
    except KeyError:
        raise UnknownTransform(f"unknown transform kind {t.kind!r}") from None
    return fn(d, **t.params)


@dataclass(frozen=True)
class PipelineSpec:
    transforms: tuple[TransformSpec, ...]
    inputs: tuple[str, ...]
    outputs_keys: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs_keys", tuple(self.outputs_keys))
        if not self.inputs:
            raise ValueError("pipeline inputs must be non-empty")
        if not self.outputs_keys:
            raise ValueError("pipeline outputs_keys must be non-empty")

    def __call__(self, d: DataMap | None = None, **kwargs) -> DataMap:
        data = dict(d or {})
        data.update(kwargs)
        return run_pipeline(self, data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "transforms": [t.to_dict() for t in self.transforms],
            "inputs": list(self.inputs),
            "outputs_keys": list(self.outputs_keys),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PipelineSpec":
        return cls(
            transforms=tuple(TransformSpec.from_dict(t) for t in d.get("transforms", [])),
            inputs=tuple(d["inputs"]),
            outputs_keys=tuple(d["outputs_keys"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "PipelineSpec":
        return cls.from_dict(json.loads(text))


def run_pipeline(p: PipelineSpec, d: DataMap) -> DataMap:
    for key in p.inputs:
        if key not in d:
            raise MissingInputKey(key)
    data = dict(d)
    for t in p.transforms:
        data = apply_transform(t, data)
    missing = [k for k in p.outputs_keys if k not in data]
    if missing:
        raise MissingOutputKey(", ".join(missing))
    return {k: data[k] for k in p.outputs_keys}
