"""
Attention blocks: an MLP re-weighting of the linear initial estimate, and
channel and spatial gates on the feature maps of each stage.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from ..errors import shape_mismatch
from ..tensor import Mode, Param, Tensor, add, concat, mul, pool_global, relu, sigmoid, softmax
from .layers import BatchNorm, Conv3x3, Dense


@dataclass
class InitAttentionParams:
    fc1: Dense
    fc2: Dense

    @classmethod
    def create(cls, m: int, n: int, hidden: int, rng: np.random.Generator) -> "InitAttentionParams":
        return cls(Dense.create("init_attention.fc1", m, hidden, rng),
                   Dense.create("init_attention.fc2", hidden, n, rng))

    def params(self) -> List[Param]:
        return self.fc1.params() + self.fc2.params()


def init_attention(p: InitAttentionParams, y: Tensor, x0_lin: Tensor) -> Tensor:
    """x0 = x0_lin * softmax(MLP(y)), row by row."""
    m, n = p.fc1.weight.shape[1], p.fc2.weight.shape[0]
    if y.ndim != 2 or x0_lin.ndim != 2 or y.shape[0] != x0_lin.shape[0] \
            or y.shape[1] != m or x0_lin.shape[1] != n:
        raise shape_mismatch("init_attention", y.shape, x0_lin.shape, (m, n))
    a_q = softmax(p.fc2(relu(p.fc1(y))))
    return mul(x0_lin, a_q)


@dataclass
class ChannelAttentionParams:
    """Shared conv -> BN -> ReLU -> conv tower applied to both spatial poolings."""
    conv_a: Conv3x3
    bn: BatchNorm
    conv_b: Conv3x3

    @classmethod
    def create(cls, name: str, channels: int, rng: np.random.Generator) -> "ChannelAttentionParams":
        hidden = max(1, channels // 4)
        return cls(Conv3x3.create(f"{name}.conv_a", channels, hidden, rng),
                   BatchNorm.create(f"{name}.bn", hidden),
                   Conv3x3.create(f"{name}.conv_b", hidden, channels, rng))

    @property
    def channels(self) -> int:
        return self.conv_a.weight.shape[1]

    def tower(self, pooled: Tensor, mode: Mode, track: bool = True) -> Tensor:
        return self.conv_b(relu(self.bn(self.conv_a(pooled), mode, track)))

    def params(self) -> List[Param]:
        return self.conv_a.params() + self.bn.params() + self.conv_b.params()

    def batchnorms(self) -> List[BatchNorm]:
        return [self.bn]

    def zero_(self) -> None:
        self.conv_a.zero_()
        self.conv_b.zero_()


def channel_attention(p: ChannelAttentionParams, features: Tensor, mode: Mode = Mode.EVAL) -> Tensor:
    if features.ndim != 4 or features.shape[1] != p.channels:
        raise shape_mismatch("channel_attention", features.shape, (p.channels,))
    avg = p.tower(pool_global(features, "spatial", "avg"), mode)
    # running statistics follow the average branch only
    peak = p.tower(pool_global(features, "spatial", "max"), mode, track=False)
    return mul(features, sigmoid(add(avg, peak)))


@dataclass
class SpatialAttentionParams:
    conv: Conv3x3
    channels: int

    @classmethod
    def create(cls, name: str, channels: int, rng: np.random.Generator) -> "SpatialAttentionParams":
        return cls(Conv3x3.create(f"{name}.conv", 2, 1, rng), channels)

    def params(self) -> List[Param]:
        return self.conv.params()

    def zero_(self) -> None:
        self.conv.zero_()


def spatial_attention(p: SpatialAttentionParams, features: Tensor) -> Tensor:
    if features.ndim != 4 or features.shape[1] != p.channels:
        raise shape_mismatch("spatial_attention", features.shape, (p.channels,))
    pooled = concat([pool_global(features, "channel", "avg"),
                     pool_global(features, "channel", "max")], axis=1)
    return mul(features, sigmoid(p.conv(pooled)))
