from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .config_models import ModelKind, NetConfig, TrainConfig

CHECKPOINT_VERSION = 1


class TensorEntry(BaseModel):
    name: str = Field(..., description="param/, buffer/, adam_m/ or adam_v/ prefixed tensor name")
    shape: Tuple[int, ...]
    offset: int = Field(..., ge=0, description="Byte offset into the payload")


class EpochRecord(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    epoch: int = Field(..., ge=0)
    total: float
    recon: float
    ortho: float


class CheckpointManifest(BaseModel):
    version: int = Field(CHECKPOINT_VERSION)
    kind: ModelKind
    net: NetConfig
    train: Optional[TrainConfig] = Field(None)
    epoch: int = Field(0, ge=0)
    adam_step: int = Field(0, ge=0)
    history: List[EpochRecord] = Field(default_factory=list)
    tensors: List[TensorEntry] = Field(default_factory=list)
