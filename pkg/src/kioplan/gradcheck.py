"""Central finite-difference checks for every analytic gradient in the pipeline.

Errors are reported as ``max |analytic - numeric| / max(max |numeric|, floor)``
over the probed entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import BodyPose, Camera, render_depth
from .micronet import engine as E
from .micronet.engine import Tensor
from .micronet.layers import CBAM, ChannelAttention, Conv2d, Linear, SpatialAttention
from .micronet.policy import PolicyConfig, PolicyNet
from .micronet.train import Sample, TrainConfig, batch_loss
from .objectives import (GuidanceConfig, LossWeights, guidance_loss, safety_loss, smoothness_loss,
                         total_loss)
from .primitives import KinodynamicState, PrimitiveSet
from .shield import PhysicalEnvelope, SafetyParams, body_to_world_terminals, bound_activation, bound_activation_grad
from .world import Wall, World

FLOOR = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)


def relative_error(analytic, numeric) -> float:
    a, n = np.ravel(analytic), np.ravel(numeric)
    return float(np.max(np.abs(a - n)) / max(float(np.max(np.abs(n))), FLOOR))


def numeric_grad(f, x: np.ndarray, idx=None, h: float = 1e-6) -> np.ndarray:
    """Central differences of scalar ``f`` at the flat indices ``idx`` of ``x`` (all entries by default)."""
    x = np.array(x, dtype=float)
    flat = x.reshape(-1)
    idx = np.arange(flat.size) if idx is None else np.asarray(idx)
    out = np.empty(len(idx))
    for j, i in enumerate(idx):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        out[j] = (fp - fm) / (2 * h)
    return out


def scene(seed: int = 0):
    """A wall 2.5 m ahead with an opening, a moving start state and a goal beyond the wall."""
    rng = np.random.default_rng(seed)
    world = World((20.0, 20.0, 6.0), [Wall((7.5, 8.0, 3.0), (0.2, 2.0, 3.0)), Wall((7.5, 12.6, 3.0), (0.2, 1.6, 3.0))])
    state = KinodynamicState(np.array([5.0, 10.0, 2.0]), np.array([0.8, 0.1, 0.0]), np.array([0.1, -0.2, 0.0]), 0.05)
    pose = BodyPose.from_yaw(state.position, state.yaw)
    camera = Camera()
    image = render_depth(world, pose, camera.intrinsics, camera.extrinsics)
    K = 5
    x_body = bound_activation(rng.normal(0.0, 0.7, (K, 9)), PhysicalEnvelope())
    terminals = body_to_world_terminals(state, x_body)
    conf = rng.uniform(0.2, 0.9, K)
    goal = np.array([14.0, 11.0, 2.5])
    return world, state, pose, camera, image, terminals, conf, goal


def check_bound_activation(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    env = PhysicalEnvelope()
    h = rng.normal(0.0, 1.0, (5, 9))
    w = rng.normal(size=h.shape)
    num = numeric_grad(lambda x: float((w * bound_activation(x, env)).sum()), h)
    return CheckResult("bound_activation", relative_error(w * bound_activation_grad(h, env), num), 1e-4)


def check_losses(seed: int = 0) -> list[CheckResult]:
    _, state, pose, camera, image, terminals, conf, goal = scene(seed)
    safety, guidance, M = SafetyParams(), GuidanceConfig(), 20

    def make(T, c):
        return PrimitiveSet(state, T, c, 1.5)

    fns = {
        "smoothness_loss": lambda T, c: smoothness_loss(make(T, c)),
        "safety_loss": lambda T, c: safety_loss(make(T, c), image, pose, camera, safety, M),
        "guidance_loss": lambda T, c: guidance_loss(make(T, c), goal, guidance),
    }
    out = []
    for name, fn in fns.items():
        _, gT, gc = fn(terminals, conf)
        nT = numeric_grad(lambda T: fn(T, conf)[0], terminals)
        nc = numeric_grad(lambda c: fn(terminals, c)[0], conf)
        out.append(CheckResult(name, max(relative_error(gT, nT), relative_error(gc, nc)), 1e-4))
    br = total_loss(make(terminals, conf), image, pose, camera, goal, LossWeights(), guidance, safety, M)
    nT = numeric_grad(lambda T: total_loss(make(T, conf), image, pose, camera, goal, LossWeights(), guidance,
                                           safety, M).total, terminals)
    out.append(CheckResult("total_loss", relative_error(br.grad_terminals, nT), 1e-4))
    return out


def _module_check(name: str, module, x: np.ndarray, seed: int, probes: int = 24, tol: float = 1e-4) -> CheckResult:
    """Check d(sum(W * module(x)))/d(x and every parameter) on random probe entries."""
    rng = np.random.default_rng(seed)
    W = rng.normal(size=module(Tensor(x)).shape)

    def loss_of_input(xv):
        return float((W * module(Tensor(xv)).data).sum())

    xt = Tensor(x, requires_grad=True)
    module.zero_grad()
    module(xt).backward(W)
    errs = []
    idx = rng.choice(x.size, min(probes, x.size), replace=False)
    errs.append(relative_error(xt.grad.reshape(-1)[idx], numeric_grad(loss_of_input, x, idx)))
    for _, p in module.named_parameters():
        pidx = rng.choice(p.data.size, min(probes, p.data.size), replace=False)
        analytic = p.grad.reshape(-1)[pidx]
        orig = p.data

        def loss_of_param(pv, p=p):
            p.data = pv
            return loss_of_input(x)

        num = numeric_grad(loss_of_param, orig, pidx)
        p.data = orig
        errs.append(relative_error(analytic, num))
    return CheckResult(name, max(errs), tol)


class _Wrap:
    """Adapt a bare tensor function to the module interface used by ``_module_check``."""

    def __init__(self, fn, **params):
        self.fn = fn
        self.params = params

    def __call__(self, x):
        return self.fn(x)

    def named_parameters(self):
        return iter(self.params.items())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None


def check_layers(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    # spread-out activations keep max-pool ties and ReLU kinks away from the probes
    x = rng.normal(0.0, 1.0, (2, 8, 6, 7))
    conv = Conv2d(8, 4, 3, rng, stride=2)
    conv.bias.data = rng.normal(size=4)
    lin = Linear(12, 5, rng)
    lin.bias.data = rng.normal(size=5)
    ca = ChannelAttention(8, 4, rng)
    sa = SpatialAttention(rng)
    sa.bias.data = rng.normal(size=1)
    cbam = CBAM(8, 4, rng)
    return [
        _module_check("conv2d", conv, x, seed),
        _module_check("linear", lin, rng.normal(size=(3, 12)), seed),
        _module_check("channel_attention", ca, x, seed),
        _module_check("spatial_attention", sa, x, seed),
        _module_check("cbam", cbam, x, seed),
        _module_check("softplus_tanh", _Wrap(lambda t: E.tanh(E.softplus(t))), rng.normal(size=(4, 5)), seed),
    ]


def check_full_graph(seed: int = 0, probes: int = 6) -> CheckResult:
    """Parameters -> policy -> envelope -> primitives -> total loss, against finite differences."""
    world, state, _, camera, image, _, _, goal = scene(seed)
    net = PolicyNet(PolicyConfig(seed=seed))
    # a second sample with a different pose keeps the batch path honest
    st2 = KinodynamicState(np.array([5.5, 9.0, 2.2]), np.array([0.5, 0.3, 0.0]), np.zeros(3), 0.3)
    im2 = render_depth(world, BodyPose.from_yaw(st2.position, st2.yaw), camera.intrinsics, camera.extrinsics)
    batch = [Sample(image, state, goal), Sample(im2, st2, goal)]
    cfg = TrainConfig(camera=camera)
    net.zero_grad()
    _, raw, up = batch_loss(net, batch, cfg)
    raw.backward(up)
    rng = np.random.default_rng(seed)
    named = dict(net.named_parameters())
    errs = []
    for name in ("stem.weight", "blocks.1.conv1.weight", "attention.2.channel.w0", "attention.0.spatial.weight",
                 "fc1.weight", "head.weight", "head.bias"):
        p = named[name]
        idx = rng.choice(p.data.size, min(probes, p.data.size), replace=False)
        analytic = p.grad.reshape(-1)[idx].copy()
        orig = p.data

        def f(v, p=p):
            p.data = v
            return batch_loss(net, batch, cfg)[0].total

        num = numeric_grad(f, orig, idx, h=1e-5)
        p.data = orig
        errs.append(relative_error(analytic, num))
    return CheckResult("full_graph", max(errs), 1e-3)


def run_all(seed: int = 0) -> list[CheckResult]:
    return [check_bound_activation(seed), *check_losses(seed), *check_layers(seed), check_full_graph(seed)]


__all__ = ["CheckResult", "check_bound_activation", "check_full_graph", "check_layers", "check_losses",
           "numeric_grad", "relative_error", "run_all", "scene"]
