"""
Training blocks: cropped from an image corpus or generated synthetically.
"""

import logging
from pathlib import Path
from typing import List, Union

import numpy as np

from .errors import DataError, ParameterError
from .image_io import list_images, read_image
from .sensing import luminance

log = logging.getLogger(__name__)


def to_gray_unit(image: np.ndarray) -> np.ndarray:
    """0..255 grey or [3, H, W] colour image -> luminance on [0, 1]."""
    if image.ndim == 3:
        image = luminance(image)
    return image / 255.0


def load_corpus(directory: Union[str, Path]) -> List[np.ndarray]:
    paths = list_images(directory)
    if not paths:
        raise DataError(f"no images found in {directory}", details={"file_path": str(directory)})
    images = [to_gray_unit(read_image(p)) for p in paths]
    log.info("loaded %d corpus images from %s", len(images), directory)
    return images


def sample_blocks(images: List[np.ndarray], count: int, block_size: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Random block_size x block_size crops, drawn with replacement, flattened row-major."""
    if not images:
        raise DataError("corpus is empty")
    if count < 1:
        raise ParameterError(f"block count must be positive, got {count}")
    blocks = np.empty((count, block_size * block_size))
    for i in range(count):
        image = images[rng.integers(len(images))]
        height, width = image.shape
        if height < block_size or width < block_size:
            image = np.pad(image, ((0, max(0, block_size - height)), (0, max(0, block_size - width))),
                           mode="edge")
            height, width = image.shape
        top = rng.integers(height - block_size + 1)
        left = rng.integers(width - block_size + 1)
        blocks[i] = image[top:top + block_size, left:left + block_size].reshape(-1)
    return blocks


def synthetic_blocks(count: int, block_size: int, seed: int = 0) -> np.ndarray:
    """
    Piecewise-smooth blocks on [0, 1]: a tilted plane, a straight step edge
    and a low-frequency ripple.
    """
    if count < 1:
        raise ParameterError(f"block count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    coords = (np.arange(block_size) + 0.5) / block_size
    rows, cols = np.meshgrid(coords, coords, indexing="ij")
    blocks = np.empty((count, block_size * block_size))
    for i in range(count):
        base, tilt_r, tilt_c = rng.uniform(0.2, 0.8), rng.normal(0, 0.2), rng.normal(0, 0.2)
        angle, offset, step = rng.uniform(0, np.pi), rng.uniform(-0.3, 0.3), rng.uniform(-0.4, 0.4)
        freq_r, freq_c, ripple = rng.integers(1, 4), rng.integers(1, 4), rng.uniform(0, 0.1)
        image = base + tilt_r * (rows - 0.5) + tilt_c * (cols - 0.5)
        image += step * ((np.cos(angle) * (rows - 0.5) + np.sin(angle) * (cols - 0.5)) > offset)
        image += ripple * np.cos(np.pi * freq_r * rows) * np.cos(np.pi * freq_c * cols)
        blocks[i] = np.clip(image, 0.0, 1.0).reshape(-1)
    return blocks
