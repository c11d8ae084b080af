"""
Unrolled AMP network.

Stage k forms R = W_phi^T Z + X, denoises it with a balanced CNN that adds
its output back onto R, and updates the residual with a learned Onsager
coefficient:

    X_k = CNN_k(R) + R
    Z_k = y - W_phi X_k + phi_k Z_{k-1}

Blocks 2 and 4 of each CNN share a shape so that the symmetry residual
block4(block2(u)) - u can be penalised during training.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import NumericError, shape_mismatch
from ..models import NetConfig
from ..sensing import make_gaussian_phi, measurement_count
from ..tensor import Mode, Param, Tensor, activation, add, charbonnier, dense, matmul, mul, reshape, sub
from .attention import (ChannelAttentionParams, InitAttentionParams, SpatialAttentionParams,
                        channel_attention, init_attention, spatial_attention)
from .layers import BatchNorm, Conv3x3, ConvBnConv

log = logging.getLogger(__name__)

ONSAGER_INIT = 0.1

# independent random streams per component
SENSING_STREAM = 0
CNN_STREAM = 1
INIT_ATTENTION_STREAM = 2
STAGE_ATTENTION_STREAM = 3


@dataclass
class StageParams:
    index: int
    block1: Conv3x3
    block2: ConvBnConv
    block3: BatchNorm
    block4: ConvBnConv
    block5: Conv3x3
    onsager_phi: Param
    channel_attention: Optional[ChannelAttentionParams] = None
    spatial_attention: Optional[SpatialAttentionParams] = None

    @classmethod
    def create(cls, index: int, config: NetConfig, rng: np.random.Generator,
               attention_rng: np.random.Generator) -> "StageParams":
        c = config.channels
        name = f"stage{index}"
        stage = cls(
            index=index,
            block1=Conv3x3.create(f"{name}.block1", 1, c, rng),
            block2=ConvBnConv.create(f"{name}.block2", c, rng, config.inner_relu),
            block3=BatchNorm.create(f"{name}.block3", c),
            block4=ConvBnConv.create(f"{name}.block4", c, rng, config.inner_relu),
            block5=Conv3x3.create(f"{name}.block5", c, 1, rng),
            onsager_phi=Param(f"{name}.onsager_phi", np.full(1, ONSAGER_INIT)),
        )
        if config.channel_attention:
            stage.channel_attention = ChannelAttentionParams.create(f"{name}.channel_attention", c, attention_rng)
        if config.spatial_attention:
            stage.spatial_attention = SpatialAttentionParams.create(f"{name}.spatial_attention", c, attention_rng)
        return stage

    def params(self) -> List[Param]:
        params = (self.block1.params() + self.block2.params() + self.block3.params()
                  + self.block4.params() + self.block5.params() + [self.onsager_phi])
        if self.channel_attention is not None:
            params += self.channel_attention.params()
        if self.spatial_attention is not None:
            params += self.spatial_attention.params()
        return params

    def batchnorms(self) -> List[BatchNorm]:
        bns = self.block2.batchnorms() + [self.block3] + self.block4.batchnorms()
        if self.channel_attention is not None:
            bns += self.channel_attention.batchnorms()
        return bns


@dataclass
class AmpNetParams:
    config: NetConfig
    w_phi: Param
    w_q: Param
    stages: List[StageParams] = field(default_factory=list)
    init_attention: Optional[InitAttentionParams] = None

    @property
    def m_p(self) -> int:
        return self.w_phi.shape[0]

    @property
    def n_p(self) -> int:
        return self.w_phi.shape[1]

    def params(self) -> List[Param]:
        params = [self.w_phi, self.w_q]
        if self.init_attention is not None:
            params += self.init_attention.params()
        for stage in self.stages:
            params += stage.params()
        return params

    def named_params(self) -> Dict[str, Param]:
        return {p.name: p for p in self.params()}

    def batchnorms(self) -> List[BatchNorm]:
        return [bn for stage in self.stages for bn in stage.batchnorms()]

    def named_buffers(self) -> Dict[str, np.ndarray]:
        buffers: Dict[str, np.ndarray] = {}
        for bn in self.batchnorms():
            buffers.update(bn.buffers())
        return buffers

    def load_buffers(self, arrays: Dict[str, np.ndarray]) -> None:
        for bn in self.batchnorms():
            bn.load_buffers(arrays)


def init_params(config: NetConfig) -> AmpNetParams:
    """
    Initialise a network. Each component draws from its own random stream,
    so toggling attention leaves the remaining weights unchanged.
    """
    n = config.n_p
    m = measurement_count(config.ratio, n)
    sensing_rng = np.random.default_rng([config.seed, SENSING_STREAM])
    cnn_rng = np.random.default_rng([config.seed, CNN_STREAM])
    stage_attention_rng = np.random.default_rng([config.seed, STAGE_ATTENTION_STREAM])

    if config.learn_phi:
        w_phi = Param("w_phi", sensing_rng.normal(0.0, 1.0 / math.sqrt(n), size=(m, n)))
    else:
        w_phi = Param("w_phi", make_gaussian_phi(config.ratio, n, config.seed).phi, trainable=False)
    if config.pinv_init:
        w_q = Param("w_q", np.linalg.pinv(w_phi.data), trainable=False)
    else:
        w_q = Param("w_q", sensing_rng.normal(0.0, 1.0 / math.sqrt(m), size=(n, m)))

    params = AmpNetParams(config=config, w_phi=w_phi, w_q=w_q)
    if config.init_attention:
        attention_rng = np.random.default_rng([config.seed, INIT_ATTENTION_STREAM])
        params.init_attention = InitAttentionParams.create(m, n, config.mlp_hidden, attention_rng)
    params.stages = [StageParams.create(k, config, cnn_rng, stage_attention_rng)
                     for k in range(config.stages)]
    log.debug("initialised %s with %d stages, %d parameters",
              config.kind.value, config.stages, count_parameters(params))
    return params


def count_parameters(params: AmpNetParams) -> int:
    return sum(p.size for p in params.params())


@dataclass
class ForwardResult:
    x: Tensor
    stages: List[Tuple[Tensor, Tensor]] = field(default_factory=list)
    sym_residuals: List[Tensor] = field(default_factory=list)


def balanced_cnn_forward(stage: StageParams, r: Tensor, block_size: int, mode: Mode = Mode.EVAL,
                         with_symmetry: bool = True, eps: float = 1e-3,
                         act: str = "relu") -> Tuple[Tensor, Optional[Tensor]]:
    """
    Denoise flattened blocks r [B, n_p]; returns (block5(...) + r, symmetry residual).
    ``act`` is the nonlinearity between blocks 3 and 4.

    The symmetry pass re-runs block 4 on block 2's output in the same mode
    without touching the running statistics.
    """
    if r.ndim != 2 or r.shape[1] != block_size * block_size:
        raise shape_mismatch("balanced_cnn", r.shape, (block_size * block_size,))
    batch = r.shape[0]
    r_map = reshape(r, (batch, 1, block_size, block_size))

    u = stage.block1(r_map)
    d = stage.block2(u, mode)
    h = stage.block4(activation(stage.block3(d, mode), act), mode)
    if stage.channel_attention is not None:
        h = channel_attention(stage.channel_attention, h, mode)
    if stage.spatial_attention is not None:
        h = spatial_attention(stage.spatial_attention, h)
    x = reshape(add(stage.block5(h), r_map), (batch, block_size * block_size))

    sym = None
    if with_symmetry:
        sym = charbonnier(stage.block4(d, mode, track=False), u, eps)
    return x, sym


def ampnet_forward(params: AmpNetParams, y: Tensor, mode: Mode = Mode.EVAL,
                   with_symmetry: bool = True, eps: float = 1e-3) -> ForwardResult:
    """Run every stage on measurements y [B, m_p]."""
    if y.ndim != 2 or y.shape[1] != params.m_p:
        raise shape_mismatch("ampnet_forward", y.shape, params.w_phi.shape)
    config = params.config

    x = dense(y, params.w_q)
    if params.init_attention is not None:
        x = init_attention(params.init_attention, y, x)
    z = sub(y, dense(x, params.w_phi))

    result = ForwardResult(x=x)
    for stage in params.stages:
        r = add(matmul(z, params.w_phi), x) if config.amp_recurrence else x
        x, sym = balanced_cnn_forward(stage, r, config.block_size, mode, with_symmetry, eps,
                                      config.activation.value)
        z_next = sub(y, dense(x, params.w_phi))
        if config.amp_recurrence:
            z_next = add(z_next, mul(stage.onsager_phi, z))
        z = z_next
        if not (np.all(np.isfinite(x.data)) and np.all(np.isfinite(z.data))):
            raise NumericError(f"non-finite activations in stage {stage.index}", stage=stage.index)
        result.stages.append((x, z))
        if sym is not None:
            result.sym_residuals.append(sym)
    result.x = x
    return result


def linear_baseline(params: AmpNetParams) -> AmpNetParams:
    """A copy with every CNN zeroed, attention removed and W_Q = pinv(W_phi)."""
    baseline = copy.deepcopy(params)
    baseline.init_attention = None
    baseline.w_q = Param("w_q", np.linalg.pinv(baseline.w_phi.data), trainable=False)
    for stage in baseline.stages:
        stage.channel_attention = None
        stage.spatial_attention = None
        for conv in (stage.block1, stage.block2.conv_a, stage.block2.conv_b,
                     stage.block4.conv_a, stage.block4.conv_b, stage.block5):
            conv.zero_()
    return baseline
