"""Reading and writing images.

Pixels always come back as ``uint8`` arrays of shape ``(C, H, W)`` with
``C`` equal to 1 (grayscale) or 3 (RGB).  JPEG coefficient extraction is
delegated to :mod:`forgerybench.jpeg`.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptImage, ImageNotFound, IoError, UnsupportedFormat
from .jpeg import parse_jpeg

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
TIFF_MAGICS = (b"II*\x00", b"MM\x00*")
JPEG_MAGIC = b"\xff\xd8\xff"

EXTENSIONS = {
    ".png": "png",
    ".tif": "tiff",
    ".tiff": "tiff",
    ".jpg": "jpeg",
    ".jpeg": "jpeg",
    ".jpe": "jpeg",
}


def sniff_format(path: str | Path) -> str:
    """Return ``"png"``, ``"tiff"`` or ``"jpeg"`` from the file's magic bytes."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"no such image: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(PNG_MAGIC):
        return "png"
    if head[:4] in TIFF_MAGICS:
        return "tiff"
    if head.startswith(JPEG_MAGIC):
        return "jpeg"
    raise UnsupportedFormat(f"{path.name}: not a PNG, TIFF or JPEG file")


def is_jpeg(path: str | Path) -> bool:
    return sniff_format(path) == "jpeg"


def image_size(path: str | Path) -> tuple[int, int]:
    """``(height, width)`` read from the file header without decoding pixels."""
    sniff_format(path)
    try:
        with Image.open(path) as im:
            width, height = im.size
    except (UnidentifiedImageError, OSError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return height, width


def _tiff_with_tifffile(path: Path) -> np.ndarray:
    import tifffile

    arr = tifffile.imread(path)
    if arr.ndim == 3 and arr.shape[0] in (1, 3, 4) and arr.shape[-1] not in (1, 3, 4):
        arr = np.moveaxis(arr, 0, -1)
    return arr


def _to_uint8(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == np.uint8:
        return arr
    if arr.dtype == np.uint16:
        return (arr // 257).astype(np.uint8)
    if arr.dtype == bool:
        return arr.astype(np.uint8) * 255
    raise UnsupportedFormat(f"unsupported sample type {arr.dtype}")


def read_image(path: str | Path) -> np.ndarray:
    """Decode a PNG, TIFF or JPEG file into a ``(C, H, W)`` uint8 array.

    Alpha channels are dropped and 16-bit samples are mapped to 8 bits by
    integer division by 257.
    """
    path = Path(path)
    fmt = sniff_format(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("CMYK", "YCbCr", "LAB", "HSV"):
                if fmt == "jpeg" and mode == "CMYK":
                    raise UnsupportedFormat(f"{path.name}: CMYK JPEG is not supported")
                im = im.convert("RGB")
                mode = "RGB"
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            if mode == "1":
                arr = np.asarray(im.convert("L"))
            elif mode in ("I;16", "I;16B", "I;16L", "I;16N"):
                arr = np.asarray(im).astype(np.uint16)
            elif mode == "I":
                arr = np.asarray(im)
                if arr.min() < 0 or arr.max() > 65535:
                    raise UnsupportedFormat(f"{path.name}: 32-bit integer samples are not supported")
                arr = arr.astype(np.uint16)
            elif mode in ("L", "LA", "RGB", "RGBA"):
                arr = np.asarray(im)
            else:
                arr = None
    except UnsupportedFormat:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        if fmt != "tiff":
            raise CorruptImage(f"{path.name}: {exc}") from exc
        arr = None
    if arr is None:
        # multi-sample 16-bit TIFFs are outside Pillow's mode set
        try:
            arr = _tiff_with_tifffile(path)
        except Exception as exc:  # tifffile raises a variety of types
            raise CorruptImage(f"{path.name}: {exc}") from exc

    arr = _to_uint8(np.asarray(arr))
    if arr.ndim == 2:
        arr = arr[None]
    elif arr.ndim == 3:
        channels = arr.shape[-1]
        if channels in (1, 2):
            arr = arr[..., :1]
        elif channels in (3, 4):
            arr = arr[..., :3]
        else:
            raise UnsupportedFormat(f"{path.name}: {channels} channels are not supported")
        arr = np.moveaxis(arr, -1, 0)
    else:
        raise CorruptImage(f"{path.name}: unexpected array rank {arr.ndim}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise CorruptImage(f"{path.name}: empty image")
    return np.ascontiguousarray(arr)


def read_jpeg_data(path: str | Path) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Quantized DCT coefficients and quantization tables of a baseline JPEG.

    Returns ``(dct, qtables)``: ``dct[c]`` is the int16 coefficient grid of
    component ``c`` (luma first) and ``qtables[t]`` the 8x8 table with id
    ``t`` in natural order.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageNotFound(f"no such image: {path}")
    data = parse_jpeg(path)
    tables = data.frame_qtables or data.qtables
    ids = sorted(tables)
    qtables = [tables[i] for i in ids]
    return data.coefficients, qtables


def write_png(path: str | Path, image: np.ndarray) -> None:
    """Write a ``(C, H, W)`` uint8 array as a lossless PNG."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ValueError("expected a (1|3, H, W) uint8 array")
    pil = Image.fromarray(image[0] if image.shape[0] == 1 else np.moveaxis(image, 0, -1))
    path = Path(path)
    try:
        pil.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    if not os.path.isfile(path):
        raise IoError(f"cannot write {path}")
