"""Pinhole depth camera: z-depth rendering, projection and depth lookup.

Depth images are stored as ``(H, W)`` arrays indexed ``[v, u]``; pixel
``(u, v)`` sits at continuous image coordinate ``(u, v)`` (pixel centres on
the integer grid).  Values are camera-frame z, not ray length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .world import World, slab_intersect

Z_NEAR = 0.1

# camera -> body for a forward-looking optical frame: z forward, x right, y down
FORWARD_R_BC = np.array([[0.0, 0.0, 1.0],
                         [-1.0, 0.0, 0.0],
                         [0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int = 96, height: int = 72, hfov_deg: float = 87.0) -> "Intrinsics":
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}


def _check_rotation(R: np.ndarray, name: str) -> None:
    if R.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3")
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or np.linalg.det(R) < 0:
        raise ValueError(f"{name} must be a proper rotation")


def yaw_rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class BodyPose:
    """Body-to-world rotation ``R_wb`` and body origin ``t_wb``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        _check_rotation(self.rotation, "R_wb")

    @classmethod
    def from_yaw(cls, position, yaw: float) -> "BodyPose":
        return cls(yaw_rotation(yaw), np.asarray(position, dtype=float))

    @classmethod
    def identity(cls) -> "BodyPose":
        return cls(np.eye(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}


@dataclass(frozen=True)
class CameraExtrinsics:
    """Camera-to-body rotation ``R_bc`` and camera origin in the body frame ``t_bc``."""

    rotation: np.ndarray = field(default_factory=lambda: FORWARD_R_BC.copy())
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        _check_rotation(self.rotation, "R_bc")


@dataclass(frozen=True)
class Camera:
    intrinsics: Intrinsics = field(default_factory=Intrinsics.from_fov)
    extrinsics: CameraExtrinsics = field(default_factory=CameraExtrinsics)


@dataclass
class DepthImage:
    values: np.ndarray  # (H, W), metres of camera-frame z
    max_range: float = 5.0

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def world_to_camera_transform(pose: BodyPose, extr: CameraExtrinsics) -> tuple[np.ndarray, np.ndarray]:
    """``(C, o)`` such that camera-frame point = ``C @ (p_world - o)``."""
    C = extr.rotation.T @ pose.rotation.T
    o = pose.translation + pose.rotation @ extr.translation
    return C, o


def project_points(points, pose: BodyPose, intr: Intrinsics, extr: CameraExtrinsics, z_near: float = Z_NEAR):
    """Vectorised projection.

    Returns ``(u, v, z_c, valid)`` for an (n, 3) array of world points,
    where ``valid`` marks points in front of ``z_near`` and inside the image.
    """
    C, o = world_to_camera_transform(pose, extr)
    pc = (np.asarray(points, dtype=float).reshape(-1, 3) - o) @ C.T
    z = pc[:, 2]
    front = z > z_near
    zs = np.where(front, z, 1.0)
    u = intr.fx * pc[:, 0] / zs + intr.cx
    v = intr.fy * pc[:, 1] / zs + intr.cy
    valid = front & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    return u, v, z, valid


def project(point_world, pose: BodyPose, intr: Intrinsics, extr: CameraExtrinsics, z_near: float = Z_NEAR):
    """Pixel coordinates and z-depth of a world point, or ``None`` when out of view."""
    u, v, z, valid = project_points(np.asarray(point_world, float)[None], pose, intr, extr, z_near)
    if not valid[0]:
        return None
    return float(u[0]), float(v[0]), float(z[0])


def back_project(u, v, depth, pose: BodyPose, intr: Intrinsics, extr: CameraExtrinsics) -> np.ndarray:
    if depth <= 0:
        raise ValueError("depth must be positive")
    pc = np.array([(u - intr.cx) / intr.fx * depth, (v - intr.cy) / intr.fy * depth, depth])
    return pose.rotation @ (extr.rotation @ pc + extr.translation) + pose.translation


def pixel_rays(intr: Intrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z for every pixel, shape (H, W, 3)."""
    vv, uu = np.meshgrid(np.arange(intr.height, dtype=float), np.arange(intr.width, dtype=float), indexing="ij")
    return np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)], axis=-1)


def _in_frustum(world: World, idx: np.ndarray, origin, R: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Mask of boxes not entirely outside one side plane of the viewing pyramid (conservative)."""
    lo, hi = world.boxes
    signs = np.array([[i >> 2 & 1, i >> 1 & 1, i & 1] for i in range(8)], dtype=bool)
    corners = np.where(signs[None], hi[idx][:, None], lo[idx][:, None])
    pc = (corners - origin) @ R
    x, y, z = pc[..., 0], pc[..., 1], pc[..., 2]
    pad = 1.0
    tu = ((-pad - intr.cx) / intr.fx, (intr.width - 1 + pad - intr.cx) / intr.fx)
    tv = ((-pad - intr.cy) / intr.fy, (intr.height - 1 + pad - intr.cy) / intr.fy)
    outside = ((z <= 0).all(1) | (x < tu[0] * z).all(1) | (x > tu[1] * z).all(1)
               | (y < tv[0] * z).all(1) | (y > tv[1] * z).all(1))
    return ~outside


def render_depth(world: World, pose: BodyPose, intr: Intrinsics, extr: CameraExtrinsics | None = None,
                 max_range: float = 5.0) -> DepthImage:
    """Ray-cast a z-depth image of the world.

    Rays are scaled to unit camera z, so the slab entry parameter is the
    z-depth directly.  Only walls within reach of the widest pixel ray are
    tested.
    """
    extr = extr or CameraExtrinsics()
    rays_c = pixel_rays(intr).reshape(-1, 3)
    R = pose.rotation @ extr.rotation
    origin = pose.translation + pose.rotation @ extr.translation
    dirs = rays_c @ R.T
    reach = max_range * float(np.linalg.norm(rays_c, axis=1).max())
    near = world.walls_near(origin, reach) if world.walls else np.empty(0, dtype=int)
    if len(near):
        near = near[_in_frustum(world, near, origin, R, intr)]
    depth = np.full(len(dirs), float(max_range))
    if len(near):
        lo, hi = world.boxes
        t = slab_intersect(np.broadcast_to(origin, dirs.shape), dirs, lo[near], hi[near], max_range)
        depth = np.minimum(depth, t)
    return DepthImage(depth.reshape(intr.height, intr.width), float(max_range))


def sample_depth_nearest(image: DepthImage, u, v):
    """Depth at the nearest pixel centre; coordinates clamp to the border."""
    iu = np.clip(np.rint(np.asarray(u, dtype=float)), 0, image.width - 1).astype(int)
    iv = np.clip(np.rint(np.asarray(v, dtype=float)), 0, image.height - 1).astype(int)
    return image.values[iv, iu]


def bilinear_weights(image: DepthImage, u, v):
    """Interpolated depth plus its partial derivatives in u and v.

    Coordinates outside ``[0, W-1] x [0, H-1]`` clamp to the border, where
    the corresponding derivative is zero.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    W, H = image.width, image.height
    uc = np.clip(u, 0.0, W - 1.0)
    vc = np.clip(v, 0.0, H - 1.0)
    u0 = np.minimum(np.floor(uc).astype(int), max(W - 2, 0))
    v0 = np.minimum(np.floor(vc).astype(int), max(H - 2, 0))
    u1 = np.minimum(u0 + 1, W - 1)
    v1 = np.minimum(v0 + 1, H - 1)
    fu = uc - u0
    fv = vc - v0
    img = image.values
    d00, d01 = img[v0, u0], img[v0, u1]
    d10, d11 = img[v1, u0], img[v1, u1]
    # convex-combination form keeps integer coordinates exact at both ends
    top = (1.0 - fu) * d00 + fu * d01
    bot = (1.0 - fu) * d10 + fu * d11
    val = (1.0 - fv) * top + fv * bot
    du = (d01 - d00) * (1 - fv) + (d11 - d10) * fv
    dv = bot - top
    du = np.where((u < 0) | (u > W - 1), 0.0, du)
    dv = np.where((v < 0) | (v > H - 1), 0.0, dv)
    return val, du, dv


def sample_depth_bilinear(image: DepthImage, u, v):
    val = bilinear_weights(image, u, v)[0]
    return float(val) if np.ndim(val) == 0 else val


def write_pfm(path, image: DepthImage) -> None:
    """Single-channel little-endian PFM (bottom row first, per the format)."""
    data = np.ascontiguousarray(np.flipud(image.values).astype("<f4"))
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{image.width} {image.height}\n-1.0\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pfm(path, max_range: float = 5.0) -> DepthImage:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError("not a single-channel PFM file")
        w, h = map(int, fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(w * h * 4), dtype=dtype)
    if data.size != w * h:
        raise ValueError("truncated PFM payload")
    return DepthImage(np.flipud(data.reshape(h, w)).astype(float), max_range)


def write_depth_dump(stem, image: DepthImage, pose: BodyPose, intr: Intrinsics) -> tuple[Path, Path]:
    """Write ``<stem>.pfm`` and the ``<stem>.json`` sidecar."""
    stem = Path(stem)
    pfm, side = stem.with_suffix(".pfm"), stem.with_suffix(".json")
    write_pfm(pfm, image)
    side.write_text(json.dumps({"intrinsics": intr.to_dict(), "pose": pose.to_dict(),
                                "max_range": image.max_range}, indent=1) + "\n")
    return pfm, side
