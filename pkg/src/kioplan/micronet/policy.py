"""CBAM-refined residual policy mapping a depth frame and state to K candidates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import DepthImage, yaw_rotation
from ..primitives import KinodynamicState
from . import engine as E
from .engine import Tensor
from .layers import CBAM, Conv2d, Linear, Module, ResidualBlock

STATE_DIM = 9
OUT_PER_CANDIDATE = 10


@dataclass(frozen=True)
class PolicyConfig:
    K: int = 5
    widths: tuple[int, int, int] = (8, 16, 32)
    ratio: int = 8
    hidden: int = 64
    width: int = 96
    height: int = 72
    max_range: float = 5.0
    seed: int = 0


@dataclass
class PolicyOutput:
    h_kin: np.ndarray  # (K, 9) raw, unbounded
    confidences: np.ndarray  # (K,), sigmoid of the logits


def conditioning_vector(state: KinodynamicState, goal) -> np.ndarray:
    """Yaw-frame velocity, acceleration and unit goal direction."""
    R = yaw_rotation(state.yaw)
    to_goal = np.asarray(goal, dtype=float) - state.position
    n = np.linalg.norm(to_goal)
    g = to_goal / n if n > 0 else np.zeros(3)
    return np.concatenate([R.T @ state.velocity, R.T @ state.acceleration, R.T @ g])


class PolicyNet(Module):
    def __init__(self, config: PolicyConfig = PolicyConfig()):
        self.config = config
        rng = np.random.default_rng(config.seed)
        w = config.widths
        self.stem = Conv2d(1, w[0], 3, rng, stride=2)
        self.blocks = [ResidualBlock(w[0], w[0], 1, rng),
                       ResidualBlock(w[0], w[1], 2, rng),
                       ResidualBlock(w[1], w[2], 2, rng)]
        self.attention = [CBAM(c, config.ratio, rng) for c in w]
        self.fc1 = Linear(w[2] + STATE_DIM, config.hidden, rng)
        self.fc2 = Linear(config.hidden, config.hidden, rng)
        self.head = Linear(config.hidden, config.K * OUT_PER_CANDIDATE, rng, gain=0.1)

    def forward(self, images, states) -> Tensor:
        """``images`` (N, H, W) metres, ``states`` (N, 9) -> raw outputs (N, K*10)."""
        images = np.asarray(images, dtype=float)
        if images.shape[1:] != (self.config.height, self.config.width):
            raise ValueError(f"expected {self.config.height}x{self.config.width} depth, got {images.shape[1:]}")
        x = Tensor(images[:, None] / self.config.max_range)
        x = E.relu(self.stem(x))
        for block, cbam in zip(self.blocks, self.attention):
            x = cbam(block(x))
        feat = E.reshape(E.mean(x, (2, 3)), (x.shape[0], x.shape[1]))
        z = E.concat([feat, Tensor(np.asarray(states, dtype=float))], axis=1)
        z = E.relu(self.fc1(z))
        z = E.relu(self.fc2(z))
        return self.head(z)

    __call__ = forward


def split_outputs(raw: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
    """(N, K*10) raw outputs -> (h_kin (N, K, 9), logits (N, K))."""
    r = np.asarray(raw).reshape(-1, K, OUT_PER_CANDIDATE)
    return r[..., :9], r[..., 9]


def policy_forward(image: DepthImage, state_vec, net: PolicyNet) -> PolicyOutput:
    raw = net.forward(image.values[None], np.asarray(state_vec, dtype=float)[None]).data
    h, logit = split_outputs(raw, net.config.K)
    return PolicyOutput(h[0].copy(), E.sigmoid(Tensor(logit[0])).data)
