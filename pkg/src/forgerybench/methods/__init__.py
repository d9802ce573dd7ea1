"""Method registry and factory."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InvalidConfig, UnknownMethod
from ..preprocessing import PipelineSpec
from .base import BaseMethod, MethodOutput
from .dq import DQ
from .grid_align import GridAlign
from .noise_blocks import NoiseBlocks

METHOD_REGISTRY: dict[str, type[BaseMethod]] = {}


def register_method(cls: type[BaseMethod]) -> type[BaseMethod]:
    if cls.name in METHOD_REGISTRY:
        raise ValueError(f"method {cls.name!r} registered twice")
    METHOD_REGISTRY[cls.name] = cls
    return cls


for _cls in (DQ, GridAlign, NoiseBlocks):
    register_method(_cls)


def available_methods() -> list[str]:
    return sorted(METHOD_REGISTRY)


@dataclass(frozen=True)
class MethodSpec:
    name: str
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def pipeline(self) -> PipelineSpec:
        return _lookup(self.name).pipeline()

    @classmethod
    def from_json(cls, path_or_text) -> "MethodSpec":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        d = json.loads(text)
        if not isinstance(d, dict) or "name" not in d:
            raise InvalidConfig("method config needs a 'name' field")
        config = d.get("config") or {}
        if not isinstance(config, dict):
            raise InvalidConfig("method 'config' must be an object")
        return cls(d["name"], config)

    def load(self):
        return load_method(self.name, self.config)


def _lookup(name: str) -> type[BaseMethod]:
    try:
        return METHOD_REGISTRY[name]
    except KeyError:
        raise UnknownMethod(
            f"unknown method {name!r}; available: {', '.join(available_methods())}"
        ) from None


def load_method(name: str, config: dict | None = None) -> tuple[BaseMethod, PipelineSpec]:
    cls = _lookup(name)
    method = cls(**(config or {}))
    return method, cls.pipeline()


def benchmark(method: BaseMethod, data) -> MethodOutput:
    return method.benchmark(data)


__all__ = [
    "BaseMethod",
    "MethodOutput",
    "MethodSpec",
    "METHOD_REGISTRY",
    "available_methods",
    "benchmark",
    "load_method",
    "register_method",
]
