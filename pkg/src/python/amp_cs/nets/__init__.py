from .ampanet import ampanet_forward, forward, init_ampanet_params
from .ampnet import (
    AmpNetParams,
    ForwardResult,
    StageParams,
    ampnet_forward,
    balanced_cnn_forward,
    count_parameters,
    init_params,
    linear_baseline,
)
from .attention import (
    ChannelAttentionParams,
    InitAttentionParams,
    SpatialAttentionParams,
    channel_attention,
    init_attention,
    spatial_attention,
)
from .layers import BatchNorm, Conv3x3, ConvBnConv, Dense

__all__ = [
    'AmpNetParams',
    'BatchNorm',
    'ChannelAttentionParams',
    'Conv3x3',
    'ConvBnConv',
    'Dense',
    'ForwardResult',
    'InitAttentionParams',
    'SpatialAttentionParams',
    'StageParams',
    'ampanet_forward',
    'ampnet_forward',
    'balanced_cnn_forward',
    'channel_attention',
    'count_parameters',
    'forward',
    'init_ampanet_params',
    'init_attention',
    'init_params',
    'linear_baseline',
    'spatial_attention',
]
