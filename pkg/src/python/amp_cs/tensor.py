"""
Dense tensors with reverse-mode automatic differentiation.

Operations record a ``Node`` on the active ``Tape`` whenever a tape is open
and at least one input requires a gradient. ``backward`` walks the tape once,
newest node first, and writes gradients onto the leaf tensors.

Feature maps use the NCHW layout; every array is row-major.
"""

import itertools
import logging
import os
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import ContractError, DimensionError, ParameterError, shape_mismatch

log = logging.getLogger(__name__)

_DTYPE_NAME = os.environ.get("AMP_CS_DTYPE", "float64")
if _DTYPE_NAME not in ("float64", "float32"):
    raise ParameterError(f"AMP_CS_DTYPE must be float64 or float32, got {_DTYPE_NAME!r}")
DTYPE = np.dtype(_DTYPE_NAME)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

ArrayLike = Union[np.ndarray, float, int, Sequence]


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class Tensor:
    """A dense real array plus the bookkeeping backward() needs."""

    __array_priority__ = 1000

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __neg__(self): return scale(self, -1.0)
    def __matmul__(self, other): return matmul(self, other)


class Param(Tensor):
    """A named learnable tensor. Frozen params never receive gradients."""

    def __init__(self, name: str, data: ArrayLike, trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.data = np.array(self.data, copy=True)
        self.name = name
        self.trainable = trainable
        self.grad = np.zeros_like(self.data)
        # id of the backward pass that last wrote self.grad
        self.grad_pass: Optional[int] = None

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)
        self.grad_pass = None

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.shape}, trainable={self.trainable})"


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Node:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward_fn: BackwardFn


class Tape:
    """Ordered record of the operations run while the tape is open."""

    _local = threading.local()

    def __init__(self):
        self.nodes: List[Node] = []

    @classmethod
    def current(cls) -> Optional["Tape"]:
        stack = getattr(cls._local, "stack", None)
        return stack[-1] if stack else None

    def __enter__(self) -> "Tape":
        if not hasattr(Tape._local, "stack"):
            Tape._local.stack = []
        Tape._local.stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        Tape._local.stack.pop()

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def ops(self) -> List[str]:
        return [node.op for node in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)


_backward_passes = itertools.count(1)


def backward(loss: Tensor, tape: Tape, params: Optional[Iterable[Param]] = None) -> int:
    """
    Populate gradients of a scalar loss recorded on ``tape``.

    When ``params`` is given every listed Param gets a gradient, zero if the
    loss does not reach it. Returns the id stamped on those gradients.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(node.output) for node in tape.nodes}
    leaves: Dict[int, Tensor] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        for tensor, tensor_grad in zip(node.inputs, node.backward_fn(g)):
            if tensor_grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grads[key] + tensor_grad if key in grads else tensor_grad
            if key not in produced:
                leaves[key] = tensor

    pass_id = next(_backward_passes)
    if params is None:
        params = [t for t in leaves.values() if isinstance(t, Param)]
    for param in params:
        g = grads.get(id(param))
        param.grad = np.zeros_like(param.data) if g is None else np.array(g, dtype=DTYPE).reshape(param.shape)
        param.grad_pass = pass_id
    for key, tensor in leaves.items():
        if not isinstance(tensor, Param):
            tensor.grad = np.array(grads[key], dtype=DTYPE).reshape(tensor.shape)
    return pass_id


# ---------- recording helpers ----------

def _as_tensor(x: Union[Tensor, ArrayLike]) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    out = Tensor(data)
    tape = Tape.current()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(Node(op, tuple(inputs), out, backward_fn))
    return out


def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
    """Sum out the axes numpy broadcasting added so grad matches to_shape."""
    if grad.shape == to_shape:
        return grad
    while grad.ndim > len(to_shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(to_shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------- elementwise ----------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result("add", a.data + b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result("sub", a.data - b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _result("mul", a.data * b.data, (a, b),
                   lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def scale(a, factor: float) -> Tensor:
    a = _as_tensor(a)
    return _result("scale", a.data * factor, (a,), lambda g: (g * factor,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    return _result("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, bounds, axis=axis)))


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors the numpy reduction name
    x = _as_tensor(x)
    return _result("sum", np.asarray(x.data.sum()), (x,),
                   lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    n = x.size
    return _result("mean", np.asarray(x.data.mean()), (x,),
                   lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


# ---------- linear algebra ----------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Plain 2-D product a @ b."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise shape_mismatch("matmul", a.shape, b.shape)
    return _result("matmul", a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


def dense(x: Tensor, w: Tensor) -> Tensor:
    """Fully connected map out = W x, applied per row when x is a batch [B, n]."""
    x, w = _as_tensor(x), _as_tensor(w)
    if w.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != w.shape[1]:
        raise shape_mismatch("dense", x.shape, w.shape)

    def backward_fn(g):
        if x.ndim == 1:
            return g @ w.data, np.outer(g, x.data)
        return g @ w.data, g.T @ x.data

    return _result("dense", x.data @ w.data.T, (x, w), backward_fn)


# ---------- convolution ----------

def _windows(padded: np.ndarray) -> np.ndarray:
    # [B, C, H+2, W+2] -> [B, C, H, W, 3, 3]
    return sliding_window_view(padded, (3, 3), axis=(2, 3))


def _pad1(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))


def conv2d(x: Tensor, k: Tensor, bias: Tensor) -> Tensor:
    """3x3 cross-correlation, stride 1, zero padding 1 (spatial size preserved)."""
    x, k, bias = _as_tensor(x), _as_tensor(k), _as_tensor(bias)
    if x.ndim != 4 or k.ndim != 4:
        raise shape_mismatch("conv2d", x.shape, k.shape)
    if k.shape[2:] != (3, 3):
        raise ParameterError(f"conv2d: kernel must be 3x3, got {k.shape[2:]}")
    if x.shape[1] != k.shape[1] or bias.shape != (k.shape[0],):
        raise shape_mismatch("conv2d", x.shape, k.shape, bias.shape)

    win = _windows(_pad1(x.data))
    out = np.einsum("bchwij,ocij->bohw", win, k.data, optimize=True)
    out += bias.data[None, :, None, None]

    def backward_fn(g):
        dk = np.einsum("bchwij,bohw->ocij", win, g, optimize=True)
        db = g.sum(axis=(0, 2, 3))
        flipped = k.data[:, :, ::-1, ::-1]
        dx = np.einsum("bohwij,ocij->bchw", _windows(_pad1(g)), flipped, optimize=True)
        return dx, dk, db

    return _result("conv2d", out, (x, k, bias), backward_fn)


# ---------- batch normalisation ----------

@dataclass
class BatchNormState:
    """Per-channel running statistics; initialised to mean 0, variance 1."""
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def create(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels, dtype=DTYPE), np.ones(channels, dtype=DTYPE))


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
              mode: Mode = Mode.TRAIN, track: bool = True) -> Tensor:
    """
    out = gamma * (x - mu) / sqrt(var + eps) + beta over the channel axis of NCHW.

    Train mode normalises with the batch statistics over (B, H, W) and, when
    ``track`` is set, folds them into the running statistics by EMA. Eval mode
    uses the running statistics.
    """
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.ndim != 4:
        raise DimensionError(f"batchnorm expects NCHW input, got shape {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,) or state.running_mean.shape != (channels,):
        raise shape_mismatch("batchnorm", x.shape, gamma.shape, beta.shape)

    axes = (0, 2, 3)
    bcast = (None, slice(None), None, None)
    if mode == Mode.TRAIN:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if track:
            state.running_mean = state.momentum * state.running_mean + (1.0 - state.momentum) * mu
            state.running_var = state.momentum * state.running_var + (1.0 - state.momentum) * var
    else:
        mu, var = state.running_mean, state.running_var

    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu[bcast]) * inv_std[bcast]
    out = gamma.data[bcast] * xhat + beta.data[bcast]
    count = x.data.size // channels

    def backward_fn(g):
        dbeta = g.sum(axis=axes)
        dgamma = (g * xhat).sum(axis=axes)
        dxhat = g * gamma.data[bcast]
        if mode == Mode.TRAIN:
            dx = (inv_std[bcast] / count) * (
                count * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
            )
        else:
            dx = dxhat * inv_std[bcast]
        return dx, dgamma, dbeta

    return _result("batchnorm", out, (x, gamma, beta), backward_fn)


# ---------- activations ----------

def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    s = expit(x.data)
    return _result("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    x = _as_tensor(x)
    e = np.exp(x.data - x.data.max(axis=-1, keepdims=True))
    s = e / e.sum(axis=-1, keepdims=True)
    return _result("softmax", s, (x,),
                   lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),))


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "softmax": softmax}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        return _ACTIVATIONS[kind](x)
    except KeyError:
        raise ParameterError(f"unknown activation {kind!r}") from None


# ---------- global pooling ----------

def pool_global(x: Tensor, axis: str, kind: str) -> Tensor:
    """
    Global pooling of an NCHW tensor.

    axis="spatial" reduces H x W to 1 x 1 per channel; axis="channel" reduces C
    to 1 per spatial location. Max pooling routes its gradient to the first
    arg-max.
    """
    x = _as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"pool_global expects NCHW input, got shape {x.shape}")
    if kind not in ("avg", "max"):
        raise ParameterError(f"unknown pooling kind {kind!r}")
    b, c, h, w = x.shape

    if axis == "spatial":
        flat = x.data.reshape(b, c, h * w)
        out_shape = (b, c, 1, 1)
        reduce_axis = 2
    elif axis == "channel":
        flat = x.data.reshape(b, c, h * w)
        out_shape = (b, 1, h, w)
        reduce_axis = 1
    else:
        raise ParameterError(f"unknown pooling axis {axis!r}")

    if kind == "avg":
        extent = flat.shape[reduce_axis]
        out = flat.mean(axis=reduce_axis).reshape(out_shape)
        return _result("pool_avg", out, (x,),
                       lambda g: (np.broadcast_to(g / extent, x.shape).copy(),))

    idx = np.argmax(flat, axis=reduce_axis)
    idx = np.expand_dims(idx, reduce_axis)
    out = np.take_along_axis(flat, idx, axis=reduce_axis).reshape(out_shape)

    def backward_fn(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, idx, g.reshape(idx.shape), axis=reduce_axis)
        return (dflat.reshape(x.shape),)

    return _result("pool_max", out, (x,), backward_fn)


# ---------- losses ----------

def charbonnier(a: Tensor, b: Tensor, eps: float = 1e-3) -> Tensor:
    """Mean over all elements of sqrt((a - b)^2 + eps^2)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise shape_mismatch("charbonnier", a.shape, b.shape)
    if eps <= 0:
        raise ParameterError(f"charbonnier eps must be positive, got {eps}")
    diff = a.data - b.data
    root = np.sqrt(diff * diff + eps * eps)
    n = diff.size

    def backward_fn(g):
        da = g * diff / root / n
        return da, -da

    return _result("charbonnier", np.asarray(root.mean()), (a, b), backward_fn)


def mse(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise shape_mismatch("mse", a.shape, b.shape)
    diff = a.data - b.data
    n = diff.size

    def backward_fn(g):
        da = g * 2.0 * diff / n
        return da, -da

    return _result("mse", np.asarray((diff * diff).mean()), (a, b), backward_fn)
