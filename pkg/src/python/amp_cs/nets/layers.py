import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from ..tensor import BatchNormState, Mode, Param, Tensor, add, batchnorm, conv2d, dense, relu


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class Conv3x3:
    weight: Param
    bias: Param

    @classmethod
    def create(cls, name: str, c_in: int, c_out: int, rng: np.random.Generator) -> "Conv3x3":
        weight = xavier_uniform(rng, (c_out, c_in, 3, 3), fan_in=c_in * 9, fan_out=c_out * 9)
        return cls(Param(f"{name}.weight", weight), Param(f"{name}.bias", np.zeros(c_out)))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias)

    def params(self) -> List[Param]:
        return [self.weight, self.bias]

    def zero_(self) -> None:
        self.weight.data[...] = 0.0
        self.bias.data[...] = 0.0


@dataclass
class BatchNorm:
    name: str
    gamma: Param
    beta: Param
    state: BatchNormState

    @classmethod
    def create(cls, name: str, channels: int) -> "BatchNorm":
        return cls(name, Param(f"{name}.gamma", np.ones(channels)),
                   Param(f"{name}.beta", np.zeros(channels)), BatchNormState.create(channels))

    def __call__(self, x: Tensor, mode: Mode, track: bool = True) -> Tensor:
        return batchnorm(x, self.gamma, self.beta, self.state, mode, track)

    def params(self) -> List[Param]:
        return [self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.state.running_mean,
                f"{self.name}.running_var": self.state.running_var}

    def load_buffers(self, arrays: Dict[str, np.ndarray]) -> None:
        self.state.running_mean = np.array(arrays[f"{self.name}.running_mean"], dtype=self.gamma.data.dtype)
        self.state.running_var = np.array(arrays[f"{self.name}.running_var"], dtype=self.gamma.data.dtype)


@dataclass
class Dense:
    weight: Param
    bias: Param

    @classmethod
    def create(cls, name: str, n_in: int, n_out: int, rng: np.random.Generator) -> "Dense":
        weight = rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_out, n_in))
        return cls(Param(f"{name}.weight", weight), Param(f"{name}.bias", np.zeros(n_out)))

    def __call__(self, x: Tensor) -> Tensor:
        return add(dense(x, self.weight), self.bias)

    def params(self) -> List[Param]:
        return [self.weight, self.bias]


@dataclass
class ConvBnConv:
    """conv -> BN [-> ReLU] -> conv, the shape of blocks 2 and 4."""
    conv_a: Conv3x3
    bn: BatchNorm
    conv_b: Conv3x3
    inner_relu: bool = False

    @classmethod
    def create(cls, name: str, channels: int, rng: np.random.Generator,
               inner_relu: bool = False) -> "ConvBnConv":
        return cls(Conv3x3.create(f"{name}.conv_a", channels, channels, rng),
                   BatchNorm.create(f"{name}.bn", channels),
                   Conv3x3.create(f"{name}.conv_b", channels, channels, rng),
                   inner_relu)

    def __call__(self, x: Tensor, mode: Mode, track: bool = True) -> Tensor:
        h = self.bn(self.conv_a(x), mode, track)
        if self.inner_relu:
            h = relu(h)
        return self.conv_b(h)

    def params(self) -> List[Param]:
        return self.conv_a.params() + self.bn.params() + self.conv_b.params()

    def batchnorms(self) -> List[BatchNorm]:
        return [self.bn]
