"""AMP network with attention: the unrolled recurrence plus the attention gates."""

from ..errors import ParameterError
from ..models import ModelKind, NetConfig
from ..tensor import Mode, Tensor
from .ampnet import AmpNetParams, ForwardResult, ampnet_forward, init_params


def init_ampanet_params(config: NetConfig) -> AmpNetParams:
    if config.kind != ModelKind.AMPA_NET:
        raise ParameterError(f"expected an ampa-net configuration, got {config.kind.value}")
    return init_params(config)


def ampanet_forward(params: AmpNetParams, y: Tensor, mode: Mode = Mode.EVAL,
                    with_symmetry: bool = True, eps: float = 1e-3) -> ForwardResult:
    if params.config.kind != ModelKind.AMPA_NET:
        raise ParameterError(f"ampanet_forward needs an ampa-net, got {params.config.kind.value}")
    return ampnet_forward(params, y, mode, with_symmetry, eps)


def forward(params: AmpNetParams, y: Tensor, mode: Mode = Mode.EVAL,
            with_symmetry: bool = True, eps: float = 1e-3) -> ForwardResult:
    """Dispatch on the model kind."""
    if params.config.kind == ModelKind.AMPA_NET:
        return ampanet_forward(params, y, mode, with_symmetry, eps)
    return ampnet_forward(params, y, mode, with_symmetry, eps)
