"""
Finite-difference gradient checking for the tensor core.
"""

from typing import Callable, Optional, Sequence

import numpy as np

from ..tensor import Param, Tape, Tensor, backward


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return float(np.linalg.norm(analytic - numeric)) / scale


def numeric_gradient(fn: Callable[[], float], array: np.ndarray, step: float = 1e-6,
                     indices: Optional[Sequence[tuple]] = None) -> np.ndarray:
    """Central differences of fn() with respect to array, perturbed in place."""
    grad = np.zeros_like(array)
    for idx in (indices if indices is not None else np.ndindex(array.shape)):
        original = array[idx]
        array[idx] = original + step
        plus = fn()
        array[idx] = original - step
        minus = fn()
        array[idx] = original
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(build_loss: Callable[[], Tensor], tensors: Sequence[Tensor],
                    step: float = 1e-6, max_entries: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None, floor: float = 1e-6) -> float:
    """
    Largest relative error between backward() and central differences over
    ``tensors``. With max_entries, only that many randomly chosen entries of
    each tensor are compared. Gradients smaller than ``floor`` are compared in
    absolute terms, so a gradient that is exactly zero only sees round-off.
    """
    with Tape() as tape:
        loss = build_loss()
    backward(loss, tape, params=[t for t in tensors if isinstance(t, Param)])
    rng = rng or np.random.default_rng(0)

    worst = 0.0
    for tensor in tensors:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        analytic = np.array(analytic)
        indices = None
        if max_entries is not None and tensor.size > max_entries:
            flat = rng.choice(tensor.size, size=max_entries, replace=False)
            indices = [np.unravel_index(i, tensor.shape) for i in flat]
        numeric = numeric_gradient(lambda: float(build_loss().data), tensor.data, step, indices)
        if indices is not None:
            mask = np.zeros(tensor.shape, dtype=bool)
            for idx in indices:
                mask[idx] = True
            analytic = np.where(mask, analytic, 0.0)
        worst = max(worst, relative_error(analytic, numeric, floor))
    return worst
