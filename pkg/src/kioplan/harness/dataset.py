"""Training frames rendered from random collision-free poses."""

from __future__ import annotations

import io
import math

import numpy as np

from ..camera import BodyPose, Camera, DepthImage, render_depth
from ..micronet.train import Sample
from ..primitives import KinodynamicState
from ..world import WorldGenConfig, generate_world, sample_free_point


def generate_dataset(world_seeds, frames_per_world: int, world_cfg: WorldGenConfig = WorldGenConfig(),
                     camera: Camera | None = None, clearance: float = 0.3, max_range: float = 5.0,
                     max_speed: float = 2.0) -> list[Sample]:
    """``len(world_seeds) * frames_per_world`` samples.

    Poses have at least ``clearance`` to every wall.  The vehicle moves
    forward along its yaw, and goals lie 3-8 m ahead within +-30 degrees of
    the heading.
    """
    world_seeds = list(world_seeds)
    if not world_seeds or frames_per_world < 1:
        raise ValueError("need at least one world and one frame per world")
    camera = camera or Camera()
    out = []
    for seed in world_seeds:
        world = generate_world(world_cfg, seed)
        rng = np.random.default_rng([seed, 2])
        for _ in range(frames_per_world):
            p = sample_free_point(world, rng, clearance)
            yaw = rng.uniform(-math.pi, math.pi)
            heading = np.array([math.cos(yaw), math.sin(yaw), 0.0])
            vel = heading * rng.uniform(0.0, max_speed)
            acc = np.array([*rng.normal(0.0, 0.3, 2), 0.0])
            off = yaw + rng.uniform(-math.radians(30), math.radians(30))
            dist = rng.uniform(3.0, 8.0)
            goal = p + np.array([dist * math.cos(off), dist * math.sin(off), rng.uniform(-0.5, 0.5)])
            state = KinodynamicState(p, vel, acc, yaw)
            image = render_depth(world, BodyPose.from_yaw(p, yaw), camera.intrinsics, camera.extrinsics, max_range)
            out.append(Sample(image, state, goal))
    return out


def dataset_to_bytes(samples: list[Sample]) -> bytes:
    """Deterministic ``.npy`` stream of images, states (p, v, a, yaw) and goals."""
    images = np.stack([s.image.values for s in samples]).astype("<f8")
    states = np.stack([np.append(s.state.as_vector(), s.state.yaw) for s in samples]).astype("<f8")
    goals = np.stack([s.goal for s in samples]).astype("<f8")
    buf = io.BytesIO()
    for arr in (images, states, goals):
        np.save(buf, arr, allow_pickle=False)
    return buf.getvalue()


def dataset_from_bytes(blob: bytes, max_range: float = 5.0) -> list[Sample]:
    buf = io.BytesIO(blob)
    images, states, goals = (np.load(buf, allow_pickle=False) for _ in range(3))
    return [Sample(DepthImage(im, max_range), KinodynamicState.from_vector(st[:9], st[9]), g)
            for im, st, g in zip(images, states, goals)]
