"""
Adam with bias correction.

Moments are keyed by parameter name so they can be checkpointed and restored.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, StaleGradientError
from .tensor import Param

log = logging.getLogger(__name__)


def adam_update(value: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray, t: int,
                lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Adam update at step t (1-based). Returns (value, m, v)."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return value - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class Adam:
    def __init__(self, params: Sequence[Param], lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0 or not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0 or eps <= 0:
            raise ParameterError(f"invalid Adam settings lr={lr} beta1={beta1} beta2={beta2} eps={eps}")
        self.params = [p for p in params if p.trainable]
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ParameterError("Adam needs unique parameter names")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v: Dict[str, np.ndarray] = {p.name: np.zeros_like(p.data) for p in self.params}
        self._last_pass: Optional[int] = None

    def step(self) -> None:
        """Apply one update to every trainable param from its current gradient."""
        if not self.params:
            return
        passes = {p.grad_pass for p in self.params}
        if None in passes or len(passes) != 1:
            raise StaleGradientError("gradients do not all come from one backward pass")
        (pass_id,) = passes
        if pass_id == self._last_pass:
            raise StaleGradientError(f"gradients of backward pass {pass_id} were already applied")

        self.t += 1
        for p in self.params:
            p.data[...], self.m[p.name], self.v[p.name] = adam_update(
                p.data, p.grad, self.m[p.name], self.v[p.name], self.t,
                self.lr, self.beta1, self.beta2, self.eps)
        self._last_pass = pass_id

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def state_arrays(self) -> Dict[str, np.ndarray]:
        state = {f"adam_m/{name}": m for name, m in self.m.items()}
        state.update({f"adam_v/{name}": v for name, v in self.v.items()})
        return state

    def load_state(self, t: int, arrays: Dict[str, np.ndarray]) -> None:
        for name in self.m:
            self.m[name] = np.array(arrays[f"adam_m/{name}"], dtype=self.m[name].dtype)
            self.v[name] = np.array(arrays[f"adam_v/{name}"], dtype=self.v[name].dtype)
        self.t = t
