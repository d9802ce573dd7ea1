"""Command-line interface.

stdout carries machine-readable ``key: value`` lines; messages go to stderr.
"""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import benchmark as bench
from . import image_io, plots
from .datasets import available_datasets, get_descriptor, load_dataset
from .errors import ForgeryBenchError, UnknownMethod, UnknownMetric
from .methods import available_methods, load_method
from .metrics import load_metrics

EXIT_PROCESSING = 1
EXIT_USAGE = 2


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _method(name: str):
    try:
        return load_method(name)
    except UnknownMethod:
        _fail(f"unknown method {name!r}; available methods: {', '.join(available_methods())}", EXIT_USAGE)


def _load_input(path: Path, pipeline) -> dict:
    data = {}
    keys = set(pipeline.inputs)
    if keys & {"dct_coefficients", "qtables"}:
        coef, qtables = image_io.read_jpeg_data(path)
        data["dct_coefficients"] = coef
        data["qtables"] = qtables
    data["image"] = image_io.read_image(path)
    data["image_size"] = tuple(data["image"].shape[-2:])
    return pipeline({k: data[k] for k in keys})


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def main(verbose):
    """Run and benchmark image forgery detection methods."""
    level = logging.WARNING if verbose == 0 else (logging.INFO if verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@click.argument("method_name")
@click.argument("image_path", type=click.Path(path_type=Path))
@click.option("--output-folder", type=click.Path(path_type=Path), default=None,
              help="Folder to save outputs in; nothing is saved if omitted.")
@click.option("--overlay", is_flag=True, help="Also save the heatmap blended over the image.")
@click.option("--show-plot/--no-show-plot", default=False,
              help="Save a side-by-side panel figure (headless: written to panel.png).")
@click.option("--device", default=None, help="Accepted for compatibility; ignored by classical methods.")
def run(method_name, image_path, output_folder, overlay, show_plot, device):
    """Run METHOD_NAME on a single image."""
    method, pipeline = _method(method_name)
    if device:
        click.echo(f"warning: --device {device} is ignored by {method_name}", err=True)
    try:
        data = _load_input(image_path, pipeline)
        out = method.benchmark(data)
        image = image_io.read_image(image_path)
    except (ForgeryBenchError, OSError, ValueError) as exc:
        _fail(f"{type(exc).__name__}: {exc}", EXIT_PROCESSING)

    if out.detection is not None:
        click.echo(f"detection: {out.detection:g}")
    if output_folder is None:
        if overlay or show_plot:
            click.echo("note: no --output-folder given, figures not saved", err=True)
        return
    folder = Path(output_folder) / Path(image_path).stem
    try:
        folder.mkdir(parents=True, exist_ok=True)
        written = {}
        if out.heatmap is not None:
            written["heatmap"] = folder / "heatmap.png"
            image_io.write_png(written["heatmap"], plots.colorize(out.heatmap))
        if out.mask is not None:
            written["mask"] = folder / "mask.png"
            image_io.write_png(written["mask"], (out.mask * 255).astype("uint8")[None])
        if overlay:
            layer = out.heatmap if out.heatmap is not None else out.mask
            if layer is None:
                click.echo("note: method has no spatial output to overlay", err=True)
            else:
                written["overlay"] = folder / "overlay.png"
                image_io.write_png(written["overlay"], plots.overlay(image, layer))
        if show_plot:
            written["panel"] = plots.save_panel(folder / "panel.png", image, out.heatmap, out.mask,
                                                out.detection)
    except (ForgeryBenchError, OSError) as exc:
        _fail(f"{type(exc).__name__}: {exc}", EXIT_PROCESSING)
    for key, path in written.items():
        click.echo(f"{key}: {path}")


@main.command(name="benchmark")
@click.argument("method_name")
@click.argument("dataset_name")
@click.argument("dataset_path", type=click.Path(path_type=Path))
@click.option("--metrics", "metric_names", default="auroc,f1_weighted_v1",
              help="Comma-separated metric names.")
@click.option("--tampered-only", is_flag=True, help="Exclude pristine images.")
@click.option("--output-folder", type=click.Path(path_type=Path), default=Path("output"))
@click.option("--use-existing-output/--no-use-existing-output", default=False,
              help="Reuse cached method outputs from a previous run.")
@click.option("--workers", type=click.IntRange(min=1), default=1, help="Images evaluated concurrently.")
def benchmark_cmd(method_name, dataset_name, dataset_path, metric_names, tampered_only,
                  output_folder, use_existing_output, workers):
    """Benchmark METHOD_NAME on DATASET_NAME located at DATASET_PATH."""
    method, pipeline = _method(method_name)
    names = [m.strip() for m in metric_names.split(",") if m.strip()]
    if not names:
        _fail("no metrics given", EXIT_USAGE)
    try:
        load_metrics(names)
    except UnknownMetric as exc:
        _fail(str(exc), EXIT_USAGE)
    try:
        descriptor = get_descriptor(dataset_name, dataset_path)
    except KeyError:
        _fail(f"unknown dataset {dataset_name!r}; available datasets: {', '.join(available_datasets())}",
              EXIT_USAGE)
    try:
        dataset = load_dataset(descriptor, pipeline, tampered_only=tampered_only)
    except (ForgeryBenchError, OSError, ValueError) as exc:
        _fail(f"{type(exc).__name__}: {exc}", EXIT_PROCESSING)
    if len(dataset) == 0:
        _fail("no images to evaluate", EXIT_PROCESSING)
    config = bench.BenchmarkConfig(output_folder=output_folder, use_existing_output=use_existing_output,
                                   workers=workers)
    try:
        paths = bench.run(method, dataset, names, config, method_name)
    except (ForgeryBenchError, OSError) as exc:
        _fail(f"{type(exc).__name__}: {exc}", EXIT_PROCESSING)
    for path in paths:
        click.echo(f"report: {path}")


def _unsupported(name):
    @main.command(name=name, context_settings={"ignore_unknown_options": True})
    @click.argument("args", nargs=-1, type=click.UNPROCESSED)
    def stub(args):
        click.echo(f"{name} is not supported in this build", err=True)
        sys.exit(EXIT_PROCESSING)

    stub.__doc__ = "Not supported in this build."
    return stub


_unsupported("download_weights")
_unsupported("adapt_weights")


if __name__ == "__main__":
    main()
