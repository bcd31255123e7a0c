"""Minimal numpy autodiff engine and the CBAM policy network built on it."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .engine import Tensor
from .layers import CBAM, ChannelAttention, SpatialAttention
from .policy import PolicyConfig, PolicyNet, PolicyOutput, conditioning_vector, policy_forward
from .train import Adam, Sample, TrainConfig, train, train_step

__all__ = [
    "Adam", "CBAM", "ChannelAttention", "CheckpointError", "PolicyConfig", "PolicyNet", "PolicyOutput",
    "Sample", "SpatialAttention", "Tensor", "TrainConfig", "conditioning_vector", "load_checkpoint",
    "policy_forward", "save_checkpoint", "train", "train_step",
]
