"""Module containers and the standard layers built on the tensor core."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ..errors import ConfigError
from . import core
from .core import Parameter, Tensor


class Module:
    """Attribute-tree container: parameters, buffers and child modules are discovered by name."""

    training: bool = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{name}.{i}", item

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Module):
                yield from value.named_buffers(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{name}.{i}.")
        for key in getattr(self, "_buffers", ()):
            yield f"{prefix}{key}", getattr(self, key)

    def modules(self) -> Iterator[Module]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def assign_names(self, prefix: str = "") -> None:
        for name, p in self.named_parameters(prefix):
            p.name = name

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def normal_param(rng: np.random.Generator, shape, std: float, spec: str = "") -> Parameter:
    return Parameter(rng.normal(0.0, std, size=shape), init_spec=spec or f"normal(0, {std:g})")


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True, std: float | None = None):
        std = 1.0 / math.sqrt(d_in) if std is None else std
        self.weight = normal_param(rng, (d_in, d_out), std)
        self.bias = Parameter(np.zeros(d_out), init_spec="zeros") if bias else None

    def forward(self, x) -> Tensor:
        return core.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gamma = Parameter(np.ones(d), init_spec="ones")
        self.beta = Parameter(np.zeros(d), init_spec="zeros")

    def forward(self, x) -> Tensor:
        return core.layer_norm(x, self.gamma, self.beta)


class BatchNorm(Module):
    """Feature-axis batch normalization; statistics pool every leading axis."""

    _buffers = ("running_mean", "running_var")

    def __init__(self, d: int, momentum: float = 0.1):
        self.gamma = Parameter(np.ones(d), init_spec="ones")
        self.beta = Parameter(np.zeros(d), init_spec="zeros")
        self.running_mean = np.zeros(d)
        self.running_var = np.ones(d)
        self.momentum = momentum

    def forward(self, x) -> Tensor:
        return core.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var, self.training, self.momentum
        )


class Dropout(Module):
    """Dropout whose mask stream is keyed by (global seed, layer id, call counter)."""

    def __init__(self, rate: float, seed: int = 0, layer_id: int = 0):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.seed = seed
        self.layer_id = layer_id
        self.step = 0

    def forward(self, x) -> Tensor:
        if not self.training or self.rate == 0.0:
            return core.as_tensor(x)
        out = core.dropout(x, self.rate, True, (self.seed, self.layer_id, self.step))
        self.step += 1
        return out


def number_dropouts(root: Module, seed: int) -> None:
    """Give every Dropout in ``root`` a distinct layer id in traversal order."""
    for i, m in enumerate(m for m in root.modules() if isinstance(m, Dropout)):
        m.layer_id = i
        m.seed = seed
        m.step = 0
