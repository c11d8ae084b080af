from enum import Enum, IntEnum
from pathlib import Path
from typing import Annotated, Any, Dict, Optional

import yaml
from pydantic import AfterValidator, BaseModel, Field, model_validator

from ..errors import DataError


class BlockSize(IntEnum):
    MIN = 3
    DEFAULT = 33
    MAX = 256


class ModelKind(str, Enum):
    AMP_NET = "amp-net"
    AMPA_NET = "ampa-net"


class LossKind(str, Enum):
    CHARBONNIER = "charbonnier"
    MSE = "mse"


class ActivationKind(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


def validate_ratio(v: float) -> float:
    """Validate that a sampling ratio lies in (0, 1]."""
    if not 0.0 < v <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {v}")
    return v


Ratio = Annotated[float, AfterValidator(validate_ratio)]


class NetConfig(BaseModel):
    kind: ModelKind = Field(ModelKind.AMP_NET)
    ratio: Ratio = Field(..., description="Sampling ratio m_p / n_p")
    stages: int = Field(9, ge=0, le=64, description="Unrolled stages K")
    channels: int = Field(32, ge=1, le=512)
    block_size: int = Field(BlockSize.DEFAULT, ge=BlockSize.MIN, le=BlockSize.MAX)
    mlp_hidden: int = Field(128, ge=1, description="Hidden width of the initial attention MLP")
    init_attention: Optional[bool] = Field(None, description="Defaults to on for ampa-net")
    spatial_attention: Optional[bool] = Field(None, description="Defaults to on for ampa-net")
    channel_attention: Optional[bool] = Field(None, description="Defaults to on for ampa-net")
    learn_phi: bool = Field(True, description="Learn W_phi; otherwise freeze it at the seeded Gaussian")
    pinv_init: bool = Field(False, description="Freeze W_Q at pinv(W_phi)")
    amp_recurrence: bool = Field(True, description="Feed W_phi^T Z + X into each stage")
    inner_relu: bool = Field(False, description="ReLU between the two convolutions of blocks 2 and 4")
    activation: ActivationKind = Field(ActivationKind.RELU, description="Nonlinearity after block 3")
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def resolve_attention(self) -> "NetConfig":
        is_ampa = self.kind == ModelKind.AMPA_NET
        for flag in ("init_attention", "spatial_attention", "channel_attention"):
            value = getattr(self, flag)
            if value is None:
                setattr(self, flag, is_ampa)
            elif value and not is_ampa:
                raise ValueError(f"{flag} requires kind ampa-net")
        return self

    @property
    def n_p(self) -> int:
        return self.block_size * self.block_size

    @property
    def has_attention(self) -> bool:
        return bool(self.init_attention or self.spatial_attention or self.channel_attention)


class TrainConfig(BaseModel):
    net: NetConfig
    lr: float = Field(1e-4, gt=0)
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(200, ge=1)
    lambda_o: float = Field(0.01, ge=0)
    eps_charb: float = Field(1e-3, gt=0)
    loss: LossKind = Field(LossKind.CHARBONNIER)
    blocks: int = Field(8912, ge=1, description="Blocks cropped from the corpus")
    corpus: Optional[Path] = Field(None)
    checkpoint_every: int = Field(0, ge=0, description="Epochs between checkpoints, 0 = final only")
    seed: int = Field(0, ge=0)


class AmpConfig(BaseModel):
    max_iters: int = Field(100, ge=1)
    tol: float = Field(1e-8, gt=0)
    alpha: float = Field(1.0, gt=0)
    onsager: bool = Field(True)


def load_yaml_config(path: Path) -> Dict[str, Any]:
    """Read a YAML mapping; the models validate the content."""
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}", details={"file_path": str(path)}) from None
    except yaml.YAMLError as e:
        raise DataError(f"YAML parsing error in {path}: {e}", details={"file_path": str(path)}) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise DataError(f"config file {path} must hold a mapping", details={"file_path": str(path)})
    return data
