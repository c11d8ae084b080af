"""
Approximate message passing for block compressed sensing.

The solver works in a sparsifying domain s = D x, where D is orthonormal
(the 2-D DCT by default), with the effective matrix A = Phi D^T. It starts
from the minimum-norm solution and iterates soft thresholding with the
Onsager correction on the residual.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import DivergenceError, ParameterError, SingularMatrixError, shape_mismatch
from .models import AmpConfig

log = logging.getLogger(__name__)

MAX_GRAM_CONDITION = 1e12
# median(|N(0, 1)|)
MAD_SCALE = 0.6745
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 5


@dataclass(frozen=True)
class TransformD:
    """Orthonormal analysis operator; s = D x and x = D^T s."""
    matrix: np.ndarray

    @classmethod
    def dct2(cls, block_size: int) -> "TransformD":
        """2-D type-II DCT of a row-major block_size x block_size block."""
        c = scipy.fft.dct(np.eye(block_size), norm="ortho", axis=0)
        return cls(np.kron(c, c))

    @classmethod
    def identity(cls, n: int) -> "TransformD":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def analysis(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix.T

    def synthesis(self, s: np.ndarray) -> np.ndarray:
        return s @ self.matrix


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    if tau < 0:
        raise ParameterError(f"threshold must be non-negative, got {tau}")
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def eta_prime(v: np.ndarray, tau: float) -> np.ndarray:
    """Derivative of soft_threshold: 1 where |v| > tau, else 0."""
    return (np.abs(v) > tau).astype(np.float64)


class PinvOperator:
    """Minimum-norm solver x = Phi^T (Phi Phi^T)^-1 y via a Cholesky factor."""

    def __init__(self, phi: np.ndarray):
        self.phi = np.asarray(phi, dtype=np.float64)
        gram = self.phi @ self.phi.T
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > MAX_GRAM_CONDITION:
            raise SingularMatrixError(f"Phi Phi^T is singular or ill-conditioned (cond={cond:.3g})",
                                      details={"cond": float(cond)})
        try:
            self.factor = scipy.linalg.cho_factor(gram)
        except np.linalg.LinAlgError as e:
            raise SingularMatrixError(f"Cholesky factorisation of Phi Phi^T failed: {e}") from None

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.ndim not in (1, 2) or y.shape[-1] != self.phi.shape[0]:
            raise shape_mismatch("pinv_apply", self.phi.shape, y.shape)
        return (self.phi.T @ scipy.linalg.cho_solve(self.factor, y.T)).T


def pinv_apply(phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    return PinvOperator(phi)(y)


@dataclass
class AmpState:
    s: np.ndarray
    z: np.ndarray
    onsager: float = 0.0
    k: int = 0
    tau: float = 0.0


def amp_step(state: AmpState, y: np.ndarray, a: np.ndarray, tau: float, onsager: bool = True) -> AmpState:
    """
    One AMP iteration at threshold tau.

    With onsager=False this is the plain iterative soft-thresholding update
    z = y - A s.
    """
    v = state.s + a.T @ state.z
    s = soft_threshold(v, tau)
    z = y - a @ s
    coefficient = 0.0
    if onsager:
        coefficient = float(eta_prime(v, tau).sum()) / a.shape[0]
        z = z + coefficient * state.z
    return AmpState(s=s, z=z, onsager=coefficient, k=state.k + 1, tau=tau)


@dataclass
class AmpResult:
    x_hat: np.ndarray
    trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


class AmpSolver:
    """AMP for one sensing matrix; the Gram factorisation is shared by all blocks."""

    def __init__(self, phi: np.ndarray, transform: TransformD, config: Optional[AmpConfig] = None):
        phi = np.asarray(phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[1] != transform.n:
            raise shape_mismatch("amp", phi.shape, transform.matrix.shape)
        self.phi = phi
        self.transform = transform
        self.config = config or AmpConfig()
        self.a = phi @ transform.matrix.T
        self.pinv = PinvOperator(phi)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def initial_state(self, y: np.ndarray) -> AmpState:
        s = self.transform.analysis(self.pinv(y))
        return AmpState(s=s, z=y - self.a @ s)

    def threshold(self, state: AmpState) -> float:
        alpha = self.config.alpha
        if state.k == 0:
            v = state.s + self.a.T @ state.z
            null_fraction = (self.n - self.m) / self.n
            return alpha * math.sqrt(max(null_fraction, 0.0)) * float(np.median(np.abs(v))) / MAD_SCALE
        return alpha * float(np.linalg.norm(state.z)) / math.sqrt(self.m)

    def reconstruct(self, y: np.ndarray,
                    callback: Optional[Callable[[AmpState], None]] = None) -> AmpResult:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise shape_mismatch("amp_reconstruct", self.phi.shape, y.shape)
        cfg = self.config
        y_norm = float(np.linalg.norm(y))
        state = self.initial_state(y)
        trace = [float(np.linalg.norm(state.z))]
        baseline = DIVERGENCE_FACTOR * max(trace[0], y_norm)
        strikes = 0
        converged = False

        while state.k < cfg.max_iters:
            state = amp_step(state, y, self.a, self.threshold(state), onsager=cfg.onsager)
            z_norm = float(np.linalg.norm(state.z))
            trace.append(z_norm)
            if callback is not None:
                callback(state)

            if not (math.isfinite(z_norm) and np.all(np.isfinite(state.s))):
                raise DivergenceError(f"AMP produced non-finite values at iteration {state.k}", trace)
            strikes = strikes + 1 if z_norm > baseline else 0
            if strikes >= DIVERGENCE_PATIENCE:
                raise DivergenceError(
                    f"AMP residual above {baseline:.3g} for {DIVERGENCE_PATIENCE} iterations", trace)

            if z_norm <= cfg.tol * y_norm:
                converged = True
                break
            previous = trace[-2]
            if state.k >= 2 and abs(z_norm - previous) < cfg.tol * previous:
                converged = True
                break

        return AmpResult(x_hat=self.transform.synthesis(state.s), trace=trace,
                         iterations=state.k, converged=converged)

    def reconstruct_blocks(self, y_blocks: np.ndarray) -> Tuple[np.ndarray, List[int]]:
        """
        Reconstruct every row of y_blocks [B, m].

        A block on which AMP diverges falls back to the minimum-norm solution;
        the indices of those blocks are returned alongside the estimates.
        """
        y_blocks = np.asarray(y_blocks, dtype=np.float64)
        if y_blocks.ndim != 2 or y_blocks.shape[1] != self.m:
            raise shape_mismatch("amp_reconstruct", self.phi.shape, y_blocks.shape)
        x_hat = np.empty((y_blocks.shape[0], self.n))
        fallbacks: List[int] = []
        for i, y in enumerate(y_blocks):
            try:
                x_hat[i] = self.reconstruct(y).x_hat
            except DivergenceError as e:
                log.warning("AMP diverged on block %d after %d iterations, using pinv estimate",
                            i, len(e.trace) - 1)
                x_hat[i] = self.pinv(y)
                fallbacks.append(i)
        return x_hat, fallbacks


def amp_reconstruct(y: np.ndarray, phi: np.ndarray, transform: TransformD,
                    config: Optional[AmpConfig] = None,
                    callback: Optional[Callable[[AmpState], None]] = None) -> AmpResult:
    return AmpSolver(phi, transform, config).reconstruct(y, callback)
