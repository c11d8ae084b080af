"""
Whole-image reconstruction: partition, sense, reconstruct every block,
reassemble. Colour images are handled one channel at a time.
"""

import copy
import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Protocol, Tuple

import numpy as np

from .classical_amp import AmpSolver, TransformD
from .errors import DimensionError, shape_mismatch
from .models import AmpConfig
from .nets import AmpNetParams, forward
from .sensing import make_gaussian_phi, measure, partition_blocks, reassemble
from .tensor import Mode, Tensor

log = logging.getLogger(__name__)

NET_BATCH = 256


class BlockReconstructor(Protocol):
    block_size: int

    def __call__(self, blocks: np.ndarray) -> Tuple[np.ndarray, List[int]]:
        """Reconstruct blocks [B, n_p] on [0, 1]; returns estimates and pinv-fallback indices."""
        ...


class AmpReconstructor:
    """Classical AMP with the seeded Gaussian Phi and the 2-D DCT."""

    def __init__(self, ratio: float, block_size: int = 33, seed: int = 0,
                 config: Optional[AmpConfig] = None):
        self.block_size = block_size
        self.system = make_gaussian_phi(ratio, block_size * block_size, seed)
        self.solver = AmpSolver(self.system.phi, TransformD.dct2(block_size), config)

    def __call__(self, blocks: np.ndarray) -> Tuple[np.ndarray, List[int]]:
        return self.solver.reconstruct_blocks(measure(self.system, blocks))


class NetReconstructor:
    """A trained network; phi, when given, replaces the learned W_phi."""

    def __init__(self, params: AmpNetParams, phi: Optional[np.ndarray] = None):
        if phi is not None:
            if phi.shape != params.w_phi.shape:
                raise shape_mismatch("fixed phi", phi.shape, params.w_phi.shape)
            params = copy.deepcopy(params)
            params.w_phi.data[...] = phi
        self.params = params
        self.block_size = params.config.block_size

    def __call__(self, blocks: np.ndarray) -> Tuple[np.ndarray, List[int]]:
        w_phi = self.params.w_phi.data
        estimates = []
        for start in range(0, len(blocks), NET_BATCH):
            y = Tensor(blocks[start:start + NET_BATCH] @ w_phi.T)
            estimates.append(forward(self.params, y, Mode.EVAL, with_symmetry=False).x.data)
        return np.vstack(estimates), []


@dataclass
class ImageResult:
    image: np.ndarray
    fallback_blocks: int
    seconds: float


def reconstruct_image(image: np.ndarray, reconstructor: BlockReconstructor) -> ImageResult:
    """Reconstruct a 0..255 image ([H, W] or [3, H, W]); the result is rounded to 8 bits."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        channels = [image]
    elif image.ndim == 3 and image.shape[0] == 3:
        channels = list(image)
    else:
        raise DimensionError(f"expected a [H, W] or [3, H, W] image, got shape {image.shape}")

    started = time.perf_counter()
    outputs = []
    fallbacks = 0
    for channel in channels:
        blocks, grid = partition_blocks(channel / 255.0, reconstructor.block_size)
        estimates, fallback_idx = reconstructor(blocks)
        fallbacks += len(fallback_idx)
        outputs.append(np.clip(np.round(reassemble(estimates, grid) * 255.0), 0.0, 255.0))
    seconds = time.perf_counter() - started
    if fallbacks:
        log.warning("%d block(s) fell back to the pinv estimate", fallbacks)
    result = outputs[0] if image.ndim == 2 else np.stack(outputs)
    return ImageResult(result, fallbacks, seconds)
