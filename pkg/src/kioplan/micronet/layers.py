"""Trainable layers: convolution, dense, residual block and CBAM attention."""

from __future__ import annotations

import numpy as np

from . import engine as E
from .engine import Tensor


def to_f32_grid(a: np.ndarray) -> np.ndarray:
    """Round to the nearest float32 value, kept as float64 (checkpoints store float32)."""
    return np.asarray(a, dtype=np.float32).astype(np.float64)


def parameter(data, name: str) -> Tensor:
    return Tensor(to_f32_grid(data), requires_grad=True, name=name)


class Module:
    def named_parameters(self, prefix: str = ""):
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(prefix + key + ".")
            elif isinstance(val, list):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng, stride: int = 1, padding: int | None = None,
                 gain: float = 1.0):
        std = gain * np.sqrt(2.0 / (c_in * k * k))
        self.weight = parameter(rng.normal(0.0, std, size=(c_out, c_in, k, k)), "weight")
        self.bias = parameter(np.zeros(c_out), "bias")
        self.stride = stride
        self.padding = k // 2 if padding is None else padding

    def __call__(self, x: Tensor) -> Tensor:
        return E.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng, gain: float = 1.0):
        std = gain * np.sqrt(2.0 / n_in)
        self.weight = parameter(rng.normal(0.0, std, size=(n_out, n_in)), "weight")
        self.bias = parameter(np.zeros(n_out), "bias")

    def __call__(self, x: Tensor) -> Tensor:
        return E.linear(x, self.weight, self.bias)


class ChannelAttention(Module):
    """Shared two-layer MLP over average- and max-pooled channel descriptors."""

    def __init__(self, channels: int, ratio: int, rng, scale: float = 1.0):
        if channels % ratio:
            raise ValueError(f"ratio {ratio} must divide channel count {channels}")
        hidden = channels // ratio
        self.ratio = ratio
        self.w0 = parameter(rng.normal(0.0, scale * np.sqrt(2.0 / channels), size=(hidden, channels)), "w0")
        self.w1 = parameter(rng.normal(0.0, scale * np.sqrt(1.0 / hidden), size=(channels, hidden)), "w1")

    def _mlp(self, z: Tensor) -> Tensor:
        return E.linear(E.relu(E.linear(z, self.w0)), self.w1)

    def __call__(self, F: Tensor) -> Tensor:
        N, C = F.shape[:2]
        if C != self.w0.shape[1]:
            raise ValueError(f"channel attention expects {self.w0.shape[1]} channels, got {C}")
        avg = E.reshape(E.mean(F, (2, 3)), (N, C))
        mx = E.reshape(E.amax(F, (2, 3)), (N, C))
        return E.reshape(E.sigmoid(self._mlp(avg) + self._mlp(mx)), (N, C, 1, 1))


class SpatialAttention(Module):
    """7x7 convolution over channel-wise mean and max maps."""

    def __init__(self, rng, kernel: int = 7, scale: float = 1.0):
        self.weight = parameter(rng.normal(0.0, scale * np.sqrt(1.0 / (2 * kernel * kernel)),
                                           size=(1, 2, kernel, kernel)), "weight")
        self.bias = parameter(np.zeros(1), "bias")

    def __call__(self, F: Tensor) -> Tensor:
        pooled = E.concat([E.mean(F, 1), E.amax(F, 1)], axis=1)
        k = self.weight.shape[-1]
        return E.sigmoid(E.conv2d(pooled, self.weight, self.bias, 1, k // 2))


class CBAM(Module):
    def __init__(self, channels: int, ratio: int, rng, scale: float = 1.0):
        self.channel = ChannelAttention(channels, ratio, rng, scale)
        self.spatial = SpatialAttention(rng, scale=scale)

    def __call__(self, F: Tensor) -> Tensor:
        F1 = self.channel(F) * F
        return self.spatial(F1) * F1

    def zero_init(self) -> "CBAM":
        for p in self.parameters():
            p.data[...] = 0.0
        return self


class ResidualBlock(Module):
    def __init__(self, c_in: int, c_out: int, stride: int, rng):
        self.conv1 = Conv2d(c_in, c_out, 3, rng, stride=stride)
        self.conv2 = Conv2d(c_out, c_out, 3, rng, gain=0.5)
        self.skip = Conv2d(c_in, c_out, 1, rng, stride=stride) if (stride != 1 or c_in != c_out) else None

    def __call__(self, x: Tensor) -> Tensor:
        y = self.conv2(E.relu(self.conv1(x)))
        return E.relu(y + (x if self.skip is None else self.skip(x)))
