"""
amp_cs: block compressed sensing with classical and deep-unrolled
approximate message passing.
"""

from .classical_amp import (
    AmpResult,
    AmpSolver,
    AmpState,
    TransformD,
    amp_reconstruct,
    amp_step,
    eta_prime,
    pinv_apply,
    soft_threshold,
)
from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from .errors import (
    AmpCsError,
    CheckpointError,
    ContractError,
    DataError,
    DimensionError,
    DivergenceError,
    NumericError,
    ParameterError,
    SingularMatrixError,
    StaleGradientError,
)
from .models import AmpConfig, LossKind, ModelKind, NetConfig, TrainConfig
from .reconstruction import AmpReconstructor, NetReconstructor, reconstruct_image
from .sensing import (
    BlockGrid,
    SensingSystem,
    luminance,
    make_gaussian_phi,
    measure,
    measurement_count,
    partition_blocks,
    reassemble,
)
from .training import loss_ortho, loss_recon, loss_total, train

__all__ = [
    # classical solver
    'AmpResult',
    'AmpSolver',
    'AmpState',
    'TransformD',
    'amp_reconstruct',
    'amp_step',
    'eta_prime',
    'pinv_apply',
    'soft_threshold',
    # checkpoints
    'Checkpoint',
    'load_checkpoint',
    'restore_model',
    'save_checkpoint',
    # errors
    'AmpCsError',
    'CheckpointError',
    'ContractError',
    'DataError',
    'DimensionError',
    'DivergenceError',
    'NumericError',
    'ParameterError',
    'SingularMatrixError',
    'StaleGradientError',
    # configuration
    'AmpConfig',
    'LossKind',
    'ModelKind',
    'NetConfig',
    'TrainConfig',
    # reconstruction
    'AmpReconstructor',
    'NetReconstructor',
    'reconstruct_image',
    # sensing
    'BlockGrid',
    'SensingSystem',
    'luminance',
    'make_gaussian_phi',
    'measure',
    'measurement_count',
    'partition_blocks',
    'reassemble',
    # training
    'loss_ortho',
    'loss_recon',
    'loss_total',
    'train',
]
