"""Unsupervised training objective with analytic gradients.

Every loss returns ``(value, grad_terminals, grad_confidences)`` where
``grad_terminals`` has shape (K, 9) and is taken w.r.t. the world-frame
terminal rows of the candidate set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Z_NEAR, BodyPose, Camera, DepthImage, bilinear_weights, world_to_camera_transform
from .primitives import DEFAULT_WAYPOINTS, PrimitiveSet, jerk_penalty_matrix, waypoint_basis
from .shield import SafetyParams


@dataclass(frozen=True)
class LossWeights:
    smooth: float = 1e-3
    safety: float = 1.0
    guidance: float = 0.1

    def __post_init__(self):
        if min(self.smooth, self.safety, self.guidance) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class GuidanceConfig:
    progress: float = 1.0
    lateral: float = 0.5
    diversity: float = 0.2
    lateral_tolerance: float = 2.0

    def __post_init__(self):
        if min(self.progress, self.lateral, self.diversity) < 0 or self.lateral_tolerance <= 0:
            raise ValueError("guidance weights must be non-negative and tolerance positive")


@dataclass
class LossBreakdown:
    total: float
    smooth: float
    safety: float
    guidance: float
    grad_terminals: np.ndarray
    grad_confidences: np.ndarray


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _boundaries(cands: PrimitiveSet) -> np.ndarray:
    """(K, 3, 6) boundary data for every candidate."""
    x0 = cands.x0.as_vector().reshape(3, 3).T  # columns p0, v0, a0
    xT = cands.terminals.reshape(-1, 3, 3).transpose(0, 2, 1)
    return np.concatenate([np.broadcast_to(x0, xT.shape), xT], axis=2)


def _terminal_grad(grad_D: np.ndarray) -> np.ndarray:
    """Select the terminal columns of a (K, 3, 6) boundary gradient as (K, 9) ``[p, v, a]`` rows."""
    return grad_D[:, :, 3:6].transpose(0, 2, 1).reshape(-1, 9)


def per_candidate_jerk(cands: PrimitiveSet) -> np.ndarray:
    D = _boundaries(cands)
    R = jerk_penalty_matrix(cands.duration)
    return np.einsum("kai,ij,kaj->k", D, R, D)


def smoothness_loss(cands: PrimitiveSet):
    """Confidence-weighted mean jerk cost over the candidates."""
    D = _boundaries(cands)
    R = jerk_penalty_matrix(cands.duration)
    J = np.einsum("kai,ij,kaj->k", D, R, D)
    c = cands.confidences
    csum = c.sum()
    value = float(c @ J / csum)
    grad_T = _terminal_grad(2.0 * (D @ R)) * (c / csum)[:, None]
    grad_c = (J - value) / csum
    return value, grad_T, grad_c


def safety_terms(cands: PrimitiveSet, image: DepthImage, pose: BodyPose, camera: Camera,
                 safety: SafetyParams, M: int = DEFAULT_WAYPOINTS, z_near: float = Z_NEAR):
    """Per-waypoint margins and their derivative w.r.t. camera-frame position.

    Returns ``(margin (K, M), dmargin_dpc (K, M, 3), C, B)``.
    """
    intr = camera.intrinsics
    D = _boundaries(cands)
    B = waypoint_basis(cands.duration, M)
    pts = np.einsum("mj,kaj->kma", B, D)
    C, o = world_to_camera_transform(pose, camera.extrinsics)
    pc = (pts - o) @ C.T
    x, y, z = pc[..., 0], pc[..., 1], pc[..., 2]
    front = z > z_near
    zs = np.where(front, z, 1.0)
    u = intr.fx * x / zs + intr.cx
    v = intr.fy * y / zs + intr.cy
    inview = front & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    d_obs, du, dv = bilinear_weights(image, u, v)
    margin = np.where(inview, z - d_obs, z - image.max_range) + safety.margin
    dm = np.zeros(pc.shape)
    dm[..., 2] = 1.0
    gu = np.where(inview, du, 0.0)
    gv = np.where(inview, dv, 0.0)
    dm[..., 0] -= gu * intr.fx / zs
    dm[..., 1] -= gv * intr.fy / zs
    dm[..., 2] += gu * intr.fx * x / zs ** 2 + gv * intr.fy * y / zs ** 2
    return margin, dm, C, B


def safety_loss(cands: PrimitiveSet, image: DepthImage, pose: BodyPose, camera: Camera,
                safety: SafetyParams, M: int = DEFAULT_WAYPOINTS):
    """Softplus margin penalty summed over waypoints and weighted by raw confidences.

    ``d_obs`` uses bilinear lookup.  Waypoints out of view (including those
    behind the near plane) are scored against free space at ``max_range``.
    """
    margin, dm, C, B = safety_terms(cands, image, pose, camera, safety, M)
    sp = softplus(margin)
    c = cands.confidences
    value = float(c @ sp.sum(axis=1))
    g_pc = (c[:, None] * sigmoid(margin))[..., None] * dm
    g_pw = g_pc @ C
    grad_D = np.einsum("kma,mj->kaj", g_pw, B)
    return value, _terminal_grad(grad_D), sp.sum(axis=1)


def lateral_axis(g_hat: np.ndarray) -> np.ndarray:
    """Horizontal unit vector orthogonal to ``g_hat`` (to its left when viewed from above)."""
    ref = np.cross([0.0, 0.0, 1.0], g_hat)
    if np.linalg.norm(ref) < 1e-9:
        ref = np.cross([1.0, 0.0, 0.0], g_hat)
    return ref / np.linalg.norm(ref)


def guidance_per_candidate(cands: PrimitiveSet, goal, cfg: GuidanceConfig):
    """Per-candidate progress/lateral-hinge terms and their (K, 3) displacement gradients."""
    p0 = cands.x0.position
    to_goal = np.asarray(goal, dtype=float) - p0
    dist = np.linalg.norm(to_goal)
    if dist == 0.0:
        raise ValueError("goal coincides with the current position")
    g = to_goal / dist
    dp = cands.terminals[:, 0:3] - p0
    progress = dp @ g
    perp = dp - progress[:, None] * g
    lat = np.linalg.norm(perp, axis=1)
    hinge = np.maximum(0.0, lat - cfg.lateral_tolerance)
    f = -cfg.progress * progress + cfg.lateral * hinge ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        unit_perp = np.where(lat[:, None] > 0, perp / lat[:, None], 0.0)
    df = -cfg.progress * g + (2.0 * cfg.lateral * hinge)[:, None] * unit_perp
    return f, df, g


def guidance_loss(cands: PrimitiveSet, goal, cfg: GuidanceConfig):
    """Reward progress toward the goal, hinge-penalise excess lateral offset, reward lateral spread."""
    f, df, g = guidance_per_candidate(cands, goal, cfg)
    c = cands.confidences
    csum = c.sum()
    cbar = c / csum
    s = (cands.terminals[:, 0:3] - cands.x0.position) @ lateral_axis(g)
    spread = float(np.std(s))
    value = float(cbar @ f) - cfg.diversity * spread
    grad_p = cbar[:, None] * df
    if spread > 0:
        grad_p -= cfg.diversity * ((s - s.mean()) / (len(s) * spread))[:, None] * lateral_axis(g)
    grad_T = np.zeros_like(cands.terminals)
    grad_T[:, 0:3] = grad_p
    grad_c = (f - cbar @ f) / csum
    return value, grad_T, grad_c


def total_loss(cands: PrimitiveSet, image: DepthImage, pose: BodyPose, camera: Camera, goal,
               weights: LossWeights = LossWeights(), guidance: GuidanceConfig = GuidanceConfig(),
               safety: SafetyParams = SafetyParams(), M: int = DEFAULT_WAYPOINTS) -> LossBreakdown:
    sm, sm_T, sm_c = smoothness_loss(cands)
    sf, sf_T, sf_c = safety_loss(cands, image, pose, camera, safety, M)
    gd, gd_T, gd_c = guidance_loss(cands, goal, guidance)
    w = weights
    return LossBreakdown(
        total=w.smooth * sm + w.safety * sf + w.guidance * gd,
        smooth=sm, safety=sf, guidance=gd,
        grad_terminals=w.smooth * sm_T + w.safety * sf_T + w.guidance * gd_T,
        grad_confidences=w.smooth * sm_c + w.safety * sf_c + w.guidance * gd_c,
    )
