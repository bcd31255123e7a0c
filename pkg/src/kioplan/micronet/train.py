"""Unsupervised training: network -> bounded terminals -> primitives -> loss -> Adam."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..camera import BodyPose, Camera, DepthImage
from ..objectives import GuidanceConfig, LossBreakdown, LossWeights, sigmoid, total_loss
from ..primitives import DEFAULT_DURATION, DEFAULT_WAYPOINTS, KinodynamicState, PrimitiveSet
from ..shield import (PhysicalEnvelope, SafetyParams, body_to_world_terminals, bound_activation,
                      bound_activation_grad, world_to_body_grad)
from .layers import to_f32_grid
from .policy import OUT_PER_CANDIDATE, PolicyNet, conditioning_vector, split_outputs


@dataclass
class Sample:
    image: DepthImage
    state: KinodynamicState
    goal: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    duration: float = DEFAULT_DURATION
    waypoints: int = DEFAULT_WAYPOINTS
    envelope: PhysicalEnvelope = PhysicalEnvelope(v_max=3.0)
    safety: SafetyParams = SafetyParams()
    weights: LossWeights = LossWeights()
    guidance: GuidanceConfig = GuidanceConfig()
    camera: Camera = field(default_factory=Camera)


class Adam:
    """Adaptive-moment optimizer; parameters stay on the float32 grid after every update."""

    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.betas, self.eps = lr, betas, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * p.grad ** 2
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p.data = to_f32_grid(p.data - self.lr * mhat / (np.sqrt(vhat) + self.eps))


def batch_loss(net: PolicyNet, batch: list[Sample], cfg: TrainConfig):
    """Forward the batch and compute the mean loss.

    Returns ``(breakdown, raw_output_tensor, upstream_grad)`` where
    ``upstream_grad`` is d(mean total)/d(raw outputs), ready for
    ``raw.backward(upstream_grad)``.
    """
    K = net.config.K
    images = np.stack([s.image.values for s in batch])
    states = np.stack([conditioning_vector(s.state, s.goal) for s in batch])
    raw = net.forward(images, states)
    h_all, logit_all = split_outputs(raw.data, K)
    n = len(batch)
    upstream = np.zeros((n, K, OUT_PER_CANDIDATE))
    parts = np.zeros((n, 4))
    grads_T = np.zeros((n, K, 9))
    grads_c = np.zeros((n, K))
    for i, s in enumerate(batch):
        h, logit = h_all[i], logit_all[i]
        c = sigmoid(logit)
        terminals = body_to_world_terminals(s.state, bound_activation(h, cfg.envelope))
        cands = PrimitiveSet(s.state, terminals, c, cfg.duration)
        pose = BodyPose.from_yaw(s.state.position, s.state.yaw)
        br = total_loss(cands, s.image, pose, cfg.camera, s.goal, cfg.weights, cfg.guidance, cfg.safety,
                        cfg.waypoints)
        parts[i] = br.total, br.smooth, br.safety, br.guidance
        grads_T[i], grads_c[i] = br.grad_terminals, br.grad_confidences
        upstream[i, :, :9] = world_to_body_grad(s.state, br.grad_terminals) * bound_activation_grad(h, cfg.envelope)
        upstream[i, :, 9] = br.grad_confidences * c * (1.0 - c)
    mean = parts.mean(axis=0)
    breakdown = LossBreakdown(float(mean[0]), float(mean[1]), float(mean[2]), float(mean[3]), grads_T, grads_c)
    return breakdown, raw, upstream.reshape(n, -1) / n


def train_step(batch: list[Sample], net: PolicyNet, optimizer: Adam, cfg: TrainConfig) -> LossBreakdown:
    """One Adam update; returns the loss measured before the update."""
    if not batch:
        raise ValueError("empty batch")
    net.zero_grad()
    br, raw, upstream = batch_loss(net, batch, cfg)
    if not np.isfinite(br.total) or not np.all(np.isfinite(upstream)):
        raise FloatingPointError(
            f"non-finite loss: total={br.total} smooth={br.smooth} safety={br.safety} guidance={br.guidance}")
    raw.backward(upstream)
    optimizer.step()
    return br


def train(net: PolicyNet, data: list[Sample], cfg: TrainConfig, curve_path=None, batch_size: int | None = None,
          seed: int = 0, log=None) -> list[LossBreakdown]:
    """Run ``cfg.steps`` updates, full-batch by default, minibatches drawn from a seeded stream."""
    opt = Adam(net.parameters(), cfg.lr, cfg.betas, cfg.eps)
    rng = np.random.default_rng(seed)
    history = []
    for step in range(cfg.steps):
        if batch_size is None or batch_size >= len(data):
            batch = data
        else:
            batch = [data[i] for i in rng.choice(len(data), batch_size, replace=False)]
        br = train_step(batch, net, opt, cfg)
        history.append(br)
        if log is not None:
            log(step, br)
    if curve_path is not None:
        write_loss_curve(curve_path, history)
    return history


def write_loss_curve(path, history: list[LossBreakdown]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "total", "smooth", "safety", "guidance"])
        for i, br in enumerate(history):
            w.writerow([i + 1, repr(br.total), repr(br.smooth), repr(br.safety), repr(br.guidance)])

