"""Output constraints on candidate primitives.

``bound_activation`` squashes raw network outputs into the physical
envelope with a scaled tanh.  ``shield_check`` rejects a primitive when any
waypoint, projected into the current depth frame, lies deeper than the
observed surface minus the safety margin.  The shield only ever reads the
depth image; it has no access to world geometry.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .camera import (Z_NEAR, BodyPose, Camera, DepthImage, pixel_rays, project_points, sample_depth_nearest,
                     world_to_camera_transform, yaw_rotation)
from .primitives import KinodynamicState, Primitive, PrimitiveSet, sample_waypoints, DEFAULT_WAYPOINTS


class OOVPolicy(str, enum.Enum):
    CONSERVATIVE = "conservative"
    PERMISSIVE = "permissive"


@dataclass(frozen=True)
class PhysicalEnvelope:
    p_max: float = 4.0
    v_max: float = 2.0
    a_max: float = 6.0

    def __post_init__(self):
        if min(self.p_max, self.v_max, self.a_max) <= 0:
            raise ValueError("envelope limits must be positive")

    @property
    def scale(self) -> np.ndarray:
        """``U_max`` as a 9-vector aligned with ``[p, v, a]``."""
        return np.repeat([self.p_max, self.v_max, self.a_max], 3).astype(float)


@dataclass(frozen=True)
class SafetyParams:
    radius: float = 0.3
    buffer: float = 0.2
    oov_policy: OOVPolicy = OOVPolicy.CONSERVATIVE
    clearance_check: bool = False

    def __post_init__(self):
        if self.radius <= 0 or self.buffer < 0:
            raise ValueError("radius must be positive and buffer non-negative")
        object.__setattr__(self, "oov_policy", OOVPolicy(self.oov_policy))

    @property
    def margin(self) -> float:
        return self.radius + self.buffer


@dataclass(frozen=True)
class Violation:
    waypoint: int
    u: float
    v: float
    z_c: float
    d_obs: float

    def to_dict(self) -> dict:
        # out-of-view rejections have no observed depth
        d_obs = None if np.isnan(self.d_obs) else self.d_obs
        return {"m": self.waypoint, "u": self.u, "v": self.v, "z_c": self.z_c, "d_obs": d_obs}


@dataclass(frozen=True)
class ShieldVerdict:
    accepted: bool
    first_violation: Violation | None = None

    def __post_init__(self):
        if self.accepted != (self.first_violation is None):
            raise ValueError("a verdict is accepted exactly when it has no violation")

    def to_dict(self, index: int) -> dict:
        return {"index": index, "accepted": self.accepted,
                "violation": None if self.first_violation is None else self.first_violation.to_dict()}


def bound_activation(h_kin, env: PhysicalEnvelope) -> np.ndarray:
    """``U_max * tanh(h)`` on the last axis (9 entries: displacement, velocity, acceleration).

    ``tanh`` rounds to exactly 1 for large inputs; such entries are pulled
    one ulp inside so the result stays in the open box.
    """
    scale = env.scale
    out = scale * np.tanh(np.asarray(h_kin, dtype=float))
    inner = np.nextafter(scale, 0.0)
    return np.clip(out, -inner, inner)


def bound_activation_grad(h_kin, env: PhysicalEnvelope) -> np.ndarray:
    """Elementwise derivative of ``bound_activation``."""
    t = np.tanh(np.asarray(h_kin, dtype=float))
    return env.scale * (1.0 - t * t)


def body_to_world_terminals(x0: KinodynamicState, x_body) -> np.ndarray:
    """Turn yaw-frame terminals (displacement, velocity, acceleration) into world-frame ``[pT, vT, aT]``.

    Works row-wise on (K, 9) arrays.
    """
    R = yaw_rotation(x0.yaw)
    xb = np.asarray(x_body, dtype=float).reshape(-1, 3, 3)
    xw = xb @ R.T
    xw[:, 0] += x0.position
    return xw.reshape(-1, 9)


def world_to_body_grad(x0: KinodynamicState, grad_world) -> np.ndarray:
    """Pull a gradient w.r.t. world terminals back to the yaw-frame terminals."""
    R = yaw_rotation(x0.yaw)
    return (np.asarray(grad_world, dtype=float).reshape(-1, 3, 3) @ R).reshape(-1, 9)


def surface_points(image: DepthImage, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """Camera-frame points of every pixel that saw a surface (depth below max range), plus their flat indices."""
    idx = np.flatnonzero(image.values.ravel() < image.max_range)
    rays = pixel_rays(camera.intrinsics).reshape(-1, 3)[idx]
    return rays * image.values.ravel()[idx, None], idx


def shield_check(prim: Primitive, image: DepthImage, pose: BodyPose, camera: Camera,
                 safety: SafetyParams, M: int = DEFAULT_WAYPOINTS, z_near: float = Z_NEAR) -> ShieldVerdict:
    """Reject ``prim`` at the first waypoint with ``z_c > d_obs(u, v) - (r + eps)``.

    ``d_obs`` is the nearest-pixel depth.  Waypoints closer than ``z_near``
    are skipped; waypoints that leave the image are rejected under the
    conservative policy and skipped under the permissive one.

    With ``safety.clearance_check`` a waypoint is also rejected when any
    back-projected surface pixel lies within ``r + eps`` of it.  This only
    adds rejections, and it catches surfaces beside the path that the
    waypoint's own pixel does not see.
    """
    return check_waypoints(sample_waypoints(prim, M)[None], image, pose, camera, safety, z_near)[0]


def check_waypoints(pts, image: DepthImage, pose: BodyPose, camera: Camera, safety: SafetyParams,
                    z_near: float = Z_NEAR) -> list[ShieldVerdict]:
    """Verdicts for a (K, M, 3) stack of world-frame waypoint sequences."""
    pts = np.asarray(pts, dtype=float)
    K, M = pts.shape[:2]
    flat = pts.reshape(-1, 3)
    intr = camera.intrinsics
    u, v, z, _ = project_points(flat, pose, intr, camera.extrinsics, z_near)
    front = z > z_near
    in_image = (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    d_obs = np.where(front & in_image, sample_depth_nearest(image, np.where(in_image, u, 0), np.where(in_image, v, 0)),
                     np.nan)
    violated = front & in_image & (z > d_obs - safety.margin)
    if safety.oov_policy is OOVPolicy.CONSERVATIVE:
        violated |= front & ~in_image
    if safety.clearance_check:
        surf, idx = surface_points(image, camera)
        C, o = world_to_camera_transform(pose, camera.extrinsics)
        pc = (flat - o) @ C.T
        # surfaces farther than the farthest waypoint plus the margin cannot be within the margin
        keep = np.linalg.norm(surf, axis=1) <= np.linalg.norm(pc, axis=1).max() + safety.margin
        surf, idx = surf[keep], idx[keep]
        if len(surf):
            d2 = (pc * pc).sum(1)[:, None] + (surf * surf).sum(1)[None, :] - 2.0 * pc @ surf.T
            nearest = d2.argmin(axis=1)
            close = d2[np.arange(len(flat)), nearest] < safety.margin ** 2
            # report the offending surface pixel in place of the waypoint's own pixel
            extra = close & ~violated
            iv, iu = np.divmod(idx[nearest[extra]], intr.width)
            u[extra], v[extra], d_obs[extra] = iu, iv, image.values[iv, iu]
            violated |= close
    violated = violated.reshape(K, M)
    verdicts = []
    for k in range(K):
        bad = np.flatnonzero(violated[k])
        if len(bad) == 0:
            verdicts.append(ShieldVerdict(True))
            continue
        m = int(bad[0])
        i = k * M + m
        verdicts.append(ShieldVerdict(False, Violation(m, float(u[i]), float(v[i]), float(z[i]), float(d_obs[i]))))
    return verdicts


def filter_primitives(cands: PrimitiveSet, image: DepthImage, pose: BodyPose, camera: Camera,
                      safety: SafetyParams, M: int = DEFAULT_WAYPOINTS):
    """Shield every candidate; survivors keep input order, verdicts align with the input."""
    pts = np.stack([sample_waypoints(p, M) for p in cands.primitives()])
    verdicts = check_waypoints(pts, image, pose, camera, safety)
    keep = [k for k, vd in enumerate(verdicts) if vd.accepted]
    return cands.subset(keep), verdicts
