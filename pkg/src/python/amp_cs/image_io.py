"""
8-bit image files: binary PGM (P5) and PPM (P6) read and write, PNG read.

Images are float64 arrays on the 0..255 scale, [H, W] for grey and
channel-first [3, H, W] for colour.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import png

from .errors import DataError, DimensionError

log = logging.getLogger(__name__)

PNM_SUFFIXES = {".pgm", ".ppm", ".pnm"}
IMAGE_SUFFIXES = PNM_SUFFIXES | {".png"}

PathLike = Union[str, Path]


def _pnm_header(data: bytes, path: PathLike) -> Tuple[bytes, int, int, int, int]:
    """Parse magic, width, height and maxval; returns them with the raster offset."""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PNM header", details={"file_path": str(path)})
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed PNM header", details={"file_path": str(path)}) from None
    return magic, width, height, maxval, pos


def read_pnm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _pnm_header(data, path)
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: unsupported PNM type {magic!r}", details={"file_path": str(path)})
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise DataError(f"{path}: unsupported PNM geometry {width}x{height} maxval {maxval}",
                        details={"file_path": str(path)})
    channels = 1 if magic == b"P5" else 3
    count = width * height * channels
    available = len(data) - offset
    if available < count:
        raise DataError(f"{path}: truncated raster, expected {count} bytes, got {max(available, 0)}",
                        details={"file_path": str(path)})
    raster = np.frombuffer(data, dtype=np.uint8, count=count, offset=offset)
    image = raster.astype(np.float64)
    if maxval != 255:
        image = np.round(image * (255.0 / maxval))
    if channels == 1:
        return image.reshape(height, width)
    return image.reshape(height, width, 3).transpose(2, 0, 1).copy()


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image), 0, 255).astype(np.uint8)


def write_pnm(path: PathLike, image: np.ndarray) -> None:
    """Write [H, W] as P5 or [3, H, W] as P6."""
    image = np.asarray(image)
    if image.ndim == 2:
        magic, raster = b"P5", to_uint8(image)
    elif image.ndim == 3 and image.shape[0] == 3:
        magic, raster = b"P6", to_uint8(image).transpose(1, 2, 0)
    else:
        raise DimensionError(f"write_pnm expects [H, W] or [3, H, W], got shape {image.shape}")
    height, width = raster.shape[:2]
    header = magic + b"\n%d %d\n255\n" % (width, height)
    Path(path).write_bytes(header + np.ascontiguousarray(raster).tobytes())


def read_png(path: PathLike) -> np.ndarray:
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        pixels = np.vstack([np.asarray(row, dtype=np.float64) for row in rows])
    except png.Error as e:
        raise DataError(f"{path}: {e}", details={"file_path": str(path)}) from None
    planes = info["planes"]
    pixels = pixels.reshape(height, width, planes)
    if info["bitdepth"] != 8:
        pixels = np.round(pixels * (255.0 / (2 ** info["bitdepth"] - 1)))
    if info.get("alpha"):
        pixels = pixels[:, :, :-1]
    if pixels.shape[2] == 1:
        return pixels[:, :, 0]
    return pixels.transpose(2, 0, 1).copy()


def read_image(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"image not found: {path}", details={"file_path": str(path)})
    suffix = path.suffix.lower()
    if suffix in PNM_SUFFIXES:
        return read_pnm(path)
    if suffix == ".png":
        return read_png(path)
    raise DataError(f"unsupported image format: {path}", details={"file_path": str(path)})


def write_image(path: PathLike, image: np.ndarray) -> Path:
    """Write as PGM or PPM; the suffix is chosen from the channel count."""
    path = Path(path).with_suffix(".pgm" if np.ndim(image) == 2 else ".ppm")
    write_pnm(path, image)
    return path


def list_images(directory: PathLike) -> List[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"image directory not found: {directory}", details={"file_path": str(directory)})
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
