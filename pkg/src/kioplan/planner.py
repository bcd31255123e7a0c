"""One planning decision: candidates -> envelope bounding -> shield -> selection -> fallback."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .camera import BodyPose, Camera, DepthImage
from .objectives import GuidanceConfig, guidance_per_candidate
from .primitives import (DEFAULT_DURATION, DEFAULT_WAYPOINTS, KinodynamicState, Primitive, PrimitiveSet,
                         evaluate, solve_obvp)
from .shield import (PhysicalEnvelope, SafetyParams, ShieldVerdict, body_to_world_terminals, bound_activation,
                     filter_primitives, shield_check)

FALLBACK_HALVINGS = 4
MIN_BRAKE_TIME = 0.3


@dataclass(frozen=True)
class PlannerConfig:
    K: int = 5
    M: int = DEFAULT_WAYPOINTS
    duration: float = DEFAULT_DURATION
    envelope: PhysicalEnvelope = PhysicalEnvelope()
    safety: SafetyParams = SafetyParams(clearance_check=True)
    replan_rate: float = 10.0
    tie_break: str = "guidance_then_index"
    guidance: GuidanceConfig = GuidanceConfig()
    use_shield: bool = True
    sampler_azimuth_deg: float = 60.0
    sampler_elevation_deg: float = 25.0
    sampler_min_step: float = 0.5

    def __post_init__(self):
        if self.K < 1 or self.M < 2 or self.duration <= 0 or self.replan_rate <= 0:
            raise ValueError("planner config needs K >= 1, M >= 2, T_f > 0, replan_rate > 0")
        if self.tie_break not in ("guidance_then_index", "index"):
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")


@dataclass
class PlanResult:
    chosen: Primitive | None
    chosen_index: int | None
    candidates: PrimitiveSet
    verdicts: list[ShieldVerdict]
    used_fallback: bool
    elapsed_ms: float
    fallback_verdict: ShieldVerdict | None = None

    def to_dict(self) -> dict:
        return {
            "chosen": None if self.chosen is None else self.chosen.to_dict(),
            "chosen_index": self.chosen_index,
            "used_fallback": self.used_fallback,
            "elapsed_ms": self.elapsed_ms,
            "confidences": self.candidates.confidences.tolist(),
            "verdicts": [v.to_dict(i) for i, v in enumerate(self.verdicts)],
        }


@dataclass
class PlanContext:
    """Sensor inputs for one decision: the current frame and the pose it was taken from."""

    image: DepthImage
    pose: BodyPose
    camera: Camera = field(default_factory=Camera)


def sampler_candidates(state: KinodynamicState, goal, config: PlannerConfig, seed) -> PrimitiveSet:
    """Network-free candidates drawn in a forward cone of the yaw frame.

    Confidences come from the rank of each candidate's guidance term:
    the best-ranked candidate gets ``1 - 0.5/K``, the worst ``0.5/K``.
    """
    rng = np.random.default_rng(seed)
    K, env = config.K, config.envelope
    az = np.radians(rng.uniform(-config.sampler_azimuth_deg, config.sampler_azimuth_deg, K))
    el = np.radians(rng.uniform(-config.sampler_elevation_deg, config.sampler_elevation_deg, K))
    reach = min(env.p_max, env.v_max * config.duration)
    mag = rng.uniform(min(config.sampler_min_step, reach), reach, K)
    dirs = np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    speed = np.minimum(env.v_max, mag / config.duration)
    x_body = np.zeros((K, 9))
    x_body[:, 0:3] = dirs * mag[:, None]
    x_body[:, 3:6] = dirs * speed[:, None]
    # stay strictly inside the open envelope box
    x_body = np.clip(x_body, -env.scale * (1 - 1e-9), env.scale * (1 - 1e-9))
    terminals = body_to_world_terminals(state, x_body)
    cands = PrimitiveSet(state, terminals, np.ones(K), config.duration)
    f, _, _ = guidance_per_candidate(cands, goal, config.guidance)
    rank = np.empty(K)
    rank[np.argsort(f, kind="stable")] = np.arange(K)
    cands.confidences = 1.0 - (rank + 0.5) / K
    return cands


def network_candidates(state: KinodynamicState, goal, image: DepthImage, net, config: PlannerConfig) -> PrimitiveSet:
    from .micronet.policy import conditioning_vector, policy_forward

    out = policy_forward(image, conditioning_vector(state, goal), net)
    terminals = body_to_world_terminals(state, bound_activation(out.h_kin, config.envelope))
    return PrimitiveSet(state, terminals, out.confidences, config.duration)


def select_candidate(cands: PrimitiveSet, survivors: np.ndarray, goal, config: PlannerConfig) -> int | None:
    """Index (into ``cands``) of the highest-confidence survivor with the configured tie-break."""
    if len(survivors) == 0:
        return None
    conf = cands.confidences[survivors]
    best = survivors[conf == conf.max()]
    if len(best) == 1 or config.tie_break == "index":
        return int(best.min())
    f, _, _ = guidance_per_candidate(cands.subset(best), goal, config.guidance)
    order = np.lexsort((best, f))
    return int(best[order[0]])


def hold_primitive(state: KinodynamicState, duration: float) -> Primitive:
    """Come to rest at the current position."""
    xT = KinodynamicState(state.position, np.zeros(3), np.zeros(3), state.yaw)
    return solve_obvp(state, xT, duration)


def fallback_stop(state: KinodynamicState, config: PlannerConfig, ctx: PlanContext | None = None):
    """Braking primitive used when every candidate is rejected.

    Aims for rest at ``p + v * t_brake / 2`` over ``t_brake``; if the shield
    rejects it, the displacement is halved up to four times before falling
    back to stopping at the current position.  Returns ``(primitive, verdict)``.
    """
    speed = float(np.linalg.norm(state.velocity))
    t_brake = max(speed / config.envelope.a_max, MIN_BRAKE_TIME)
    if speed == 0.0 and not np.any(state.acceleration):
        return hold_primitive(state, t_brake), None
    disp = state.velocity * t_brake / 2.0
    verdict = None
    for _ in range(FALLBACK_HALVINGS + 1):
        xT = KinodynamicState(state.position + disp, np.zeros(3), np.zeros(3), state.yaw)
        prim = solve_obvp(state, xT, t_brake)
        if ctx is None:
            return prim, None
        verdict = shield_check(prim, ctx.image, ctx.pose, ctx.camera, config.safety, config.M)
        if verdict.accepted:
            return prim, verdict
        disp = disp / 2.0
    return hold_primitive(state, t_brake), verdict


def plan_step(image: DepthImage, state: KinodynamicState, goal, source: str, config: PlannerConfig,
              camera: Camera | None = None, net=None, seed=0, pose: BodyPose | None = None) -> PlanResult:
    """Generate, bound, shield and select one primitive.

    ``source`` is ``"network"`` (requires ``net``) or ``"sampler"``.  With
    ``config.use_shield`` false every candidate survives.
    """
    t0 = time.perf_counter()
    camera = camera or Camera()
    pose = pose or BodyPose.from_yaw(state.position, state.yaw)
    if source == "network":
        if net is None:
            raise ValueError("network source needs a policy net")
        cands = network_candidates(state, goal, image, net, config)
    elif source == "sampler":
        cands = sampler_candidates(state, goal, config, seed)
    else:
        raise ValueError(f"unknown candidate source {source!r}")

    ctx = PlanContext(image, pose, camera)
    if config.use_shield:
        _, verdicts = filter_primitives(cands, image, pose, camera, config.safety, config.M)
        survivors = np.array([k for k, v in enumerate(verdicts) if v.accepted], dtype=int)
    else:
        verdicts = [ShieldVerdict(True) for _ in range(len(cands))]
        survivors = np.arange(len(cands))
    idx = select_candidate(cands, survivors, goal, config)
    fb_verdict = None
    if idx is None:
        chosen, fb_verdict = fallback_stop(state, config, ctx)
        used_fallback = True
    else:
        chosen, used_fallback = cands.primitive(idx), False
    elapsed = (time.perf_counter() - t0) * 1e3
    return PlanResult(chosen, idx, cands, verdicts, used_fallback, elapsed, fb_verdict)


def heading_of(prim: Primitive, current_yaw: float, min_speed: float = 0.1) -> float:
    """Yaw facing the primitive's mean velocity; unchanged when it barely moves horizontally."""
    p0 = evaluate(prim, 0.0)[0]
    pT = evaluate(prim, prim.duration)[0]
    mean_v = (pT - p0) / prim.duration
    if math.hypot(mean_v[0], mean_v[1]) < min_speed:
        return current_yaw
    return math.atan2(mean_v[1], mean_v[0])
