"""Method x dataset x metrics evaluation with cached outputs and JSON reports.

Layout under the output folder::

    {method}/{dataset}/outputs/{image_name}.phz
    {method}/{dataset}/metrics/{timestamp}_{mode}/{output_type}_report.json
"""
from __future__ import annotations

import datetime as _dt
import io
import json
import logging
import math
import os
import tempfile
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    AllSkipped,
    CorruptOutput,
    EmptyAccumulator,
    IoError,
    ShapeMismatch,
    SingleClass,
)
from .methods import MethodOutput
from .metrics import LOCALIZATION, MAurocMetric, load_metrics

log = logging.getLogger(__name__)

DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1")}
MANIFEST = "manifest.json"
PAYLOAD = "payload.bin"
OUTPUT_SUFFIX = ".phz"


@dataclass
class BenchmarkConfig:
    output_folder: Path = Path("output")
    save_method_outputs: bool = True
    save_extra_outputs: bool = False
    save_metrics: bool = True
    use_existing_output: bool = False
    verbose: int = 1
    device_hint: str = "cpu"
    workers: int = 1
    timestamp: str | None = None

    def __post_init__(self):
        self.output_folder = Path(self.output_folder)


# -- output container ---------------------------------------------------------


def _dtype_code(a: np.ndarray) -> str:
    if a.dtype == np.uint8:
        return "u8"
    return "f32"


def _pack(arrays: dict[str, np.ndarray], detection) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        code = _dtype_code(np.asarray(arr))
        data = np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(np.shape(arr)), "byte_offset": offset})
        chunks.append(data)
        offset += len(data)
    manifest = {"arrays": entries, "detection": detection}
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr(MANIFEST, json.dumps(manifest, sort_keys=True))
        zf.writestr(PAYLOAD, b"".join(chunks))
    return buf.getvalue()


def _unpack(path: Path) -> tuple[dict[str, np.ndarray], float | None]:
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read(MANIFEST))
            payload = zf.read(PAYLOAD)
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, KeyError, ValueError, EOFError, OSError) as exc:
        raise CorruptOutput(f"{path}: {exc}") from exc
    arrays = {}
    try:
        for e in manifest["arrays"]:
            dt = DTYPES[e["dtype"]]
            shape = tuple(int(s) for s in e["shape"])
            start = int(e["byte_offset"])
            size = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
            if start < 0 or start + size > len(payload):
                raise CorruptOutput(f"{path}: array {e['name']!r} overruns the payload")
            arrays[e["name"]] = np.frombuffer(payload, dt, count=size // dt.itemsize, offset=start).reshape(shape).copy()
        detection = manifest.get("detection")
    except CorruptOutput:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptOutput(f"{path}: malformed manifest ({exc})") from exc
    if detection is not None and not isinstance(detection, (int, float)):
        raise CorruptOutput(f"{path}: detection must be a number")
    return arrays, detection


def _atomic_write(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def output_path(folder, image_name: str) -> Path:
    return Path(folder) / f"{image_name}{OUTPUT_SUFFIX}"


def save_output(folder, image_name: str, output: MethodOutput) -> Path:
    arrays = {}
    if output.heatmap is not None:
        arrays["heatmap"] = np.asarray(output.heatmap, dtype=np.float32)
    if output.mask is not None:
        arrays["mask"] = np.asarray(output.mask, dtype=np.uint8)
    detection = None if output.detection is None else float(output.detection)
    path = output_path(folder, image_name)
    _atomic_write(path, _pack(arrays, detection))
    return path


def load_output(path) -> MethodOutput:
    arrays, detection = _unpack(Path(path))
    unknown = set(arrays) - {"heatmap", "mask"}
    if unknown:
        raise CorruptOutput(f"{path}: unexpected arrays {sorted(unknown)}")
    try:
        return MethodOutput(heatmap=arrays.get("heatmap"), mask=arrays.get("mask"), detection=detection)
    except ValueError as exc:
        raise CorruptOutput(f"{path}: {exc}") from exc


def save_extra(folder, image_name: str, extra: dict[str, np.ndarray]) -> Path | None:
    if not extra:
        return None
    path = Path(folder) / f"{image_name}.extra{OUTPUT_SUFFIX}"
    _atomic_write(path, _pack({k: np.asarray(v) for k, v in sorted(extra.items())}, None))
    return path


def load_extra(path) -> dict[str, np.ndarray]:
    return _unpack(Path(path))[0]


# -- report layout --------------------------------------------------------------


def dataset_mode(tampered_only: bool) -> str:
    return "tampered_only" if tampered_only else "full"


def method_root(output_folder, method: str, dataset: str) -> Path:
    return Path(output_folder) / method / dataset


def outputs_dir(output_folder, method: str, dataset: str) -> Path:
    return method_root(output_folder, method, dataset) / "outputs"


def report_dir(output_folder, method, dataset, timestamp, mode) -> Path:
    return method_root(output_folder, method, dataset) / "metrics" / f"{timestamp}_{mode}"


def report_path(output_folder, method, dataset, timestamp, mode, output_type) -> Path:
    return report_dir(output_folder, method, dataset, timestamp, mode) / f"{output_type}_report.json"


def _clean(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def report_json(report: dict) -> str:
    # json emits floats with repr, the shortest round-trip form
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


# -- runner ---------------------------------------------------------------------


@dataclass
class _Item:
    index: int
    name: str | None
    mask: np.ndarray | None
    output: MethodOutput | None
    error: str | None


def _prediction(output: MethodOutput, output_type: str):
    return getattr(output, output_type)


def _evaluate_one(metrics, pred, mask, output_type):
    """Fresh per-image metric states, so a failing image leaves the totals untouched."""
    if output_type in LOCALIZATION:
        if np.shape(pred) != np.shape(mask):
            raise ShapeMismatch(f"prediction {np.shape(pred)} != mask {np.shape(mask)}")
        target = mask
    else:
        target = int(np.any(mask))
    fresh = load_metrics([m.name for m in metrics])
    for m in fresh:
        m.update(pred, target)
    return fresh


def evaluate(method, dataset, metric_names: Sequence[str], config: BenchmarkConfig, method_name=None):
    """Run the method over the dataset; returns {output_type: (report dict, roc curve or None)}."""
    method_name = method_name or method.name
    dataset_name = dataset.descriptor.name
    cache = outputs_dir(config.output_folder, method_name, dataset_name)
    types = [t for t in ("heatmap", "mask", "detection") if t in method.output_types]
    requested = load_metrics(metric_names)
    per_type = {t: [m for m in requested if m.supports(t)] for t in types}

    def process(i: int) -> _Item:
        try:
            data, mask, name = dataset[i]
        except Exception as exc:  # noqa: BLE001 - per-image failures become skips
            return _Item(i, None, None, None, type(exc).__name__)
        path = output_path(cache, name)
        if config.use_existing_output and path.is_file():
            try:
                return _Item(i, name, mask, load_output(path), None)
            except CorruptOutput:
                log.warning("ignoring corrupt cached output %s", path)
        try:
            out = method.benchmark(data)
        except Exception as exc:  # noqa: BLE001
            log.info("%s failed on %s: %s", method_name, name, exc)
            return _Item(i, name, mask, None, type(exc).__name__)
        if config.save_method_outputs:
            save_output(cache, name, out)
        if config.save_extra_outputs:
            save_extra(cache, name, out.extra)
        return _Item(i, name, mask, out, None)

    indices = range(len(dataset))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            items = pool.map(process, indices)  # yields in index order
            items = list(items)
    else:
        items = (process(i) for i in indices)

    totals = {t: None for t in types}
    evaluated = {t: 0 for t in types}
    skipped = {t: 0 for t in types}
    reasons = {t: {} for t in types}

    def skip(t, reason):
        skipped[t] += 1
        reasons[t][reason] = reasons[t].get(reason, 0) + 1

    for item in items:
        if config.verbose >= 2:
            log.info("[%d/%d] %s", item.index + 1, len(dataset), item.name)
        for t in types:
            if item.error is not None:
                skip(t, item.error)
                continue
            pred = _prediction(item.output, t)
            if pred is None:
                skip(t, "MissingOutput")
                continue
            try:
                fresh = _evaluate_one(per_type[t], pred, item.mask, t)
            except Exception as exc:  # noqa: BLE001
                skip(t, type(exc).__name__)
                continue
            evaluated[t] += 1
            if totals[t] is None:
                totals[t] = fresh
            else:
                totals[t] = [a.merge(b) for a, b in zip(totals[t], fresh)]

    results = {}
    for t in types:
        values, roc = {}, None
        for idx, m in enumerate(per_type[t]):
            state = totals[t][idx] if totals[t] is not None else None
            if isinstance(state, MAurocMetric) and state.skipped:
                key = f"{m.name}:SingleClass"
                reasons[t][key] = reasons[t].get(key, 0) + state.skipped
            try:
                value = state.compute() if state is not None else None
            except (EmptyAccumulator, AllSkipped, SingleClass):
                value = None
            if not m.scalar:
                roc = value
                continue
            values[m.name] = _clean(value)
        report = {
            "method": method_name,
            "dataset": dataset_name,
            "dataset_mode": dataset_mode(bool(getattr(dataset, "tampered_only", False))),
            "output_type": t,
            "metrics": values,
            "images_evaluated": evaluated[t],
            "images_skipped": skipped[t],
            "skip_reasons": dict(sorted(reasons[t].items())),
        }
        results[t] = (report, roc)
    return results


def _write_roc(folder: Path, output_type: str, roc, title: str) -> None:
    from .plots import save_roc

    lines = ["threshold,fpr,tpr"]
    for th, f, r in zip(roc.thresholds, roc.fpr, roc.tpr):
        lines.append(f"{float(th)!r},{float(f)!r},{float(r)!r}")
    _atomic_write(folder / f"{output_type}_roc.csv", ("\n".join(lines) + "\n").encode())
    save_roc(folder / f"{output_type}_roc.png", roc.fpr, roc.tpr, title)


def run(method, dataset, metrics: Sequence[str], config: BenchmarkConfig | None = None,
        method_name: str | None = None) -> list[Path]:
    """Evaluate and write one report per output type of the method; returns the report paths."""
    config = config or BenchmarkConfig()
    method_name = method_name or method.name
    if config.device_hint and config.device_hint != "cpu":
        method.to_device(config.device_hint)
    results = evaluate(method, dataset, metrics, config, method_name)
    if not config.save_metrics:
        return []
    timestamp = config.timestamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S")
    paths = []
    for t, (report, roc) in results.items():
        path = report_path(config.output_folder, method_name, report["dataset"], timestamp,
                           report["dataset_mode"], t)
        _atomic_write(path, report_json(report).encode())
        if roc is not None:
            _write_roc(path.parent, t, roc, f"{method_name} / {report['dataset']}")
        paths.append(path)
        if config.verbose >= 1:
            log.info("wrote %s", path)
    return paths
