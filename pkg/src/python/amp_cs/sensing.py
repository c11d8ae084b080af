"""
Block compressed sensing: Gaussian sensing matrices, block partitioning of
images and luminance extraction.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DimensionError, ParameterError, shape_mismatch

DEFAULT_BLOCK_SIZE = 33
DEFAULT_BLOCK_PIXELS = DEFAULT_BLOCK_SIZE * DEFAULT_BLOCK_SIZE

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def measurement_count(ratio: float, n_p: int) -> int:
    """m_p = round-half-up(ratio * n_p), at least 1."""
    if not 0.0 < ratio <= 1.0:
        raise ParameterError(f"sampling ratio must be in (0, 1], got {ratio}")
    if n_p < 1:
        raise ParameterError(f"block length must be positive, got {n_p}")
    return max(1, math.floor(ratio * n_p + 0.5))


@dataclass
class SensingSystem:
    n_p: int
    ratio: float
    m_p: int
    phi: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.phi.shape != (self.m_p, self.n_p):
            raise shape_mismatch("sensing system", self.phi.shape, (self.m_p, self.n_p))
        if not np.all(np.isfinite(self.phi)):
            raise ParameterError("sensing matrix has non-finite entries")


def make_gaussian_phi(ratio: float, n_p: int = DEFAULT_BLOCK_PIXELS, seed: int = 0) -> SensingSystem:
    """Phi with i.i.d. N(0, 1/m_p) entries, fully determined by (ratio, n_p, seed)."""
    m_p = measurement_count(ratio, n_p)
    rng = np.random.default_rng(seed)
    phi = rng.normal(0.0, 1.0 / math.sqrt(m_p), size=(m_p, n_p))
    return SensingSystem(n_p=n_p, ratio=ratio, m_p=m_p, phi=phi, seed=seed)


def measure(system: SensingSystem, x: np.ndarray) -> np.ndarray:
    """y = Phi x for one block [n_p] or a batch [B, n_p]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != system.n_p:
        raise shape_mismatch("measure", x.shape, system.phi.shape)
    return x @ system.phi.T


@dataclass(frozen=True)
class BlockGrid:
    height: int
    width: int
    block_size: int

    @property
    def rows(self) -> int:
        return -(-self.height // self.block_size)

    @property
    def cols(self) -> int:
        return -(-self.width // self.block_size)

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def padded_shape(self) -> Tuple[int, int]:
        return self.rows * self.block_size, self.cols * self.block_size


def partition_blocks(image: np.ndarray, block_size: int = DEFAULT_BLOCK_SIZE) -> Tuple[np.ndarray, BlockGrid]:
    """
    Cut a single-channel image into non-overlapping row-major blocks.

    The bottom and right borders are padded by edge replication up to a
    multiple of block_size. Each block is vectorised row-major.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DimensionError(f"partition_blocks expects a 2-D image, got shape {image.shape}")
    if block_size < 1:
        raise ParameterError(f"block size must be positive, got {block_size}")
    height, width = image.shape
    if height < 1 or width < 1:
        raise ParameterError(f"image must be non-empty, got shape {image.shape}")

    grid = BlockGrid(height, width, block_size)
    padded_h, padded_w = grid.padded_shape
    padded = np.pad(image, ((0, padded_h - height), (0, padded_w - width)), mode="edge")
    blocks = (padded
              .reshape(grid.rows, block_size, grid.cols, block_size)
              .transpose(0, 2, 1, 3)
              .reshape(grid.count, block_size * block_size))
    return blocks, grid


def reassemble(blocks: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Inverse of partition_blocks; the padding is cropped away."""
    blocks = np.asarray(blocks)
    bs = grid.block_size
    if blocks.shape != (grid.count, bs * bs):
        raise DimensionError(
            f"reassemble: expected {grid.count} blocks of {bs * bs} pixels, got shape {blocks.shape}",
            details={"expected": (grid.count, bs * bs), "got": blocks.shape})
    padded = (blocks
              .reshape(grid.rows, grid.cols, bs, bs)
              .transpose(0, 2, 1, 3)
              .reshape(grid.padded_shape))
    return padded[:grid.height, :grid.width].copy()


def luminance(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of a channel-first [3, H, W] image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise DimensionError(f"luminance expects a [3, H, W] image, got shape {rgb.shape}")
    return np.tensordot(LUMA_WEIGHTS, rgb, axes=1)
