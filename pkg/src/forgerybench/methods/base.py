from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from ..errors import InvalidConfig, MissingKey, ShapeMismatch
from ..preprocessing import DataMap, PipelineSpec

log = logging.getLogger(__name__)


@dataclass
class MethodOutput:
    """At most one heatmap, one binary mask and one detection score.

    ``extra`` holds optional method-specific diagnostic arrays.
    """

    heatmap: np.ndarray | None = None
    mask: np.ndarray | None = None
    detection: float | None = None
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.heatmap is None and self.mask is None and self.detection is None:
            raise ValueError("a method output needs a heatmap, a mask or a detection score")

    @property
    def output_types(self) -> tuple[str, ...]:
        return tuple(
            name for name in ("heatmap", "mask", "detection") if getattr(self, name) is not None
        )


@dataclass(frozen=True)
class Param:
    default: Any
    check: Any = None  # callable(value) -> bool
    doc: str = ""


class BaseMethod:
    """Common plumbing: config validation, the benchmark entry point, device hint."""

    name: ClassVar[str] = ""
    output_types: ClassVar[tuple[str, ...]] = ()
    params: ClassVar[dict[str, Param]] = {}

    def __init__(self, **config):
        unknown = set(config) - set(self.params) - {"seed"}
        if unknown:
            raise InvalidConfig(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        values = {k: p.default for k, p in self.params.items()}
        values.update({k: v for k, v in config.items() if k != "seed"})
        for key, p in self.params.items():
            if p.check is not None and not p.check(values[key]):
                raise InvalidConfig(f"{self.name}: {key}={values[key]!r} is out of range ({p.doc})")
        self.config = values
        self.seed = config.get("seed")
        self.device = "cpu"

    @classmethod
    def pipeline(cls) -> PipelineSpec:
        raise NotImplementedError

    def predict(self, data: DataMap) -> MethodOutput:
        raise NotImplementedError

    def to_device(self, device: str) -> None:
        # classical methods run on the CPU only; the hint is kept for interface parity
        if device != "cpu":
            log.warning("%s ignores device %r", self.name, device)
        self.device = device

    def benchmark(self, data: DataMap) -> MethodOutput:
        out = self.predict(data)
        size = tuple(data["image_size"]) if "image_size" in data else None
        heatmap = mask = None
        if out.heatmap is not None:
            heatmap = np.clip(np.asarray(out.heatmap, dtype=np.float32), 0.0, 1.0)
        if out.mask is not None:
            mask = (np.asarray(out.mask) > 0).astype(np.uint8)
        for arr in (heatmap, mask):
            if arr is not None and size is not None and arr.shape != size:
                raise ShapeMismatch(f"{self.name}: output {arr.shape} != image size {size}")
        detection = None
        if out.detection is not None:
            detection = float(min(max(out.detection, 0.0), 1.0))
        return MethodOutput(heatmap=heatmap, mask=mask, detection=detection, extra=out.extra)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.config})"


def require(data: DataMap, *keys: str) -> None:
    for key in keys:
        if key not in data:
            raise MissingKey(f"missing required key {key!r}")


def positive(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0
