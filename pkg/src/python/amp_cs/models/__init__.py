# Configuration models
from .config_models import (
    ActivationKind,
    AmpConfig,
    BlockSize,
    LossKind,
    ModelKind,
    NetConfig,
    Ratio,
    TrainConfig,
    load_yaml_config,
)

# Checkpoint models
from .checkpoint_models import (
    CHECKPOINT_VERSION,
    CheckpointManifest,
    EpochRecord,
    TensorEntry,
)

__all__ = [
    # Configuration models
    'ActivationKind',
    'AmpConfig',
    'BlockSize',
    'LossKind',
    'ModelKind',
    'NetConfig',
    'Ratio',
    'TrainConfig',
    'load_yaml_config',
    # Checkpoint models
    'CHECKPOINT_VERSION',
    'CheckpointManifest',
    'EpochRecord',
    'TensorEntry',
]
