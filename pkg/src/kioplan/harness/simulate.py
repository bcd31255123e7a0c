"""Closed-loop trials: render, plan, track the chosen primitive exactly, repeat."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..camera import BodyPose, Camera, render_depth
from ..planner import PlannerConfig, PlanResult, heading_of, plan_step
from ..primitives import KinodynamicState, Primitive, evaluate, evaluate_many
from ..world import World, signed_distance

METHODS = ("net", "net_no_shield", "sampler", "sampler_no_shield")
TIERS = (2.0, 2.5, 3.0)
SCAN_RATE = math.radians(90.0)


@dataclass(frozen=True)
class TrialConfig:
    world_seed: int
    tier: float
    start: tuple[float, float, float]
    goal: tuple[float, float, float]
    method: str = "sampler"
    replan_rate: float = 10.0
    timeout: float = 120.0
    sampler_seed: int = 0
    goal_tolerance: float = 1.0
    substeps: int = 10
    trial_id: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")

    @property
    def shielded(self) -> bool:
        return not self.method.endswith("_no_shield")

    @property
    def source(self) -> str:
        return "network" if self.method.startswith("net") else "sampler"

    def to_dict(self) -> dict:
        return {"world_seed": self.world_seed, "tier": self.tier, "start": list(self.start),
                "goal": list(self.goal), "method": self.method, "replan_rate": self.replan_rate,
                "timeout": self.timeout, "sampler_seed": self.sampler_seed, "trial_id": self.trial_id}


@dataclass
class StepRecord:
    """One decision step and the motion executed until the next one.

    ``times``, ``positions``, ``velocities`` and ``clearance`` describe the
    executed samples after the step start (the step start itself belongs to
    the previous record, or to the log's initial sample).
    """

    time: float
    state: KinodynamicState
    plan: PlanResult | None
    primitive: Primitive
    executed: float
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    clearance: np.ndarray
    depth_ref: str | None = None

    def to_dict(self) -> dict:
        return {
            "t": self.time,
            "state": self.state.to_dict(),
            "plan": None if self.plan is None else self.plan.to_dict(),
            "primitive": self.primitive.to_dict(),
            "executed": self.executed,
            "depth_ref": self.depth_ref,
            "min_clearance": float(self.clearance.min()) if len(self.clearance) else None,
        }


@dataclass
class TrialLog:
    start: KinodynamicState
    start_clearance: float
    records: list[StepRecord] = field(default_factory=list)
    outcome: str = "timeout"
    trial: TrialConfig | None = None

    @property
    def duration(self) -> float:
        return float(sum(r.executed for r in self.records))

    def write(self, path) -> None:
        """JSON lines: a header, one record per step, then the metrics."""
        from .metrics import compute_metrics

        with open(path, "w") as fh:
            head = {"trial": None if self.trial is None else self.trial.to_dict(),
                    "start": self.start.to_dict(), "start_clearance": self.start_clearance}
            fh.write(json.dumps(head) + "\n")
            for r in self.records:
                fh.write(json.dumps(r.to_dict()) + "\n")
            fh.write(json.dumps({"outcome": self.outcome, "metrics": compute_metrics(self).to_dict()}) + "\n")


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _inside(world: World, p) -> bool:
    lo, hi = world.bounds
    return bool(np.all(np.asarray(p) >= lo) and np.all(np.asarray(p) <= hi))


def simulate_trial(trial: TrialConfig, world: World, net=None, planner: PlannerConfig = PlannerConfig(),
                   camera: Camera | None = None, max_range: float = 5.0) -> TrialLog:
    """Run one closed-loop flight.

    Each decision renders the current frame, plans with the trial's method,
    then follows the chosen primitive exactly for one replan interval.  The
    flight ends on goal proximity, on entering the vehicle radius of a wall
    (checked against the true world at every sub-sample) or on timeout.
    """
    camera = camera or Camera()
    r = planner.safety.radius
    start = np.asarray(trial.start, dtype=float)
    goal = np.asarray(trial.goal, dtype=float)
    for name, p in (("start", start), ("goal", goal)):
        if not _inside(world, p):
            raise ValueError(f"{name} {p} outside world bounds")
        if signed_distance(world, p) < r:
            raise ValueError(f"{name} {p} is within {r} m of a wall")
    if trial.source == "network" and net is None:
        raise ValueError(f"method {trial.method} needs a policy net")

    config = replace(planner, envelope=replace(planner.envelope, v_max=trial.tier),
                     use_shield=trial.shielded, replan_rate=trial.replan_rate)
    dt = 1.0 / trial.replan_rate
    yaw = math.atan2(goal[1] - start[1], goal[0] - start[0])
    state = KinodynamicState(start, yaw=yaw)
    log = TrialLog(state, float(signed_distance(world, start)), trial=trial)
    t = 0.0
    step = 0
    while True:
        if np.linalg.norm(state.position - goal) < trial.goal_tolerance:
            log.outcome = "reached"
            break
        if t >= trial.timeout - 1e-9:
            log.outcome = "timeout"
            break
        pose = BodyPose.from_yaw(state.position, state.yaw)
        image = render_depth(world, pose, camera.intrinsics, camera.extrinsics, max_range)
        res = plan_step(image, state, goal, trial.source, config, camera, net,
                        seed=[trial.sampler_seed, trial.world_seed, step], pose=pose)
        prim = res.chosen
        run = min(dt, prim.duration)
        ts = np.linspace(0.0, run, trial.substeps + 1)[1:]
        pos = evaluate_many(prim, ts, 0)
        vel = evaluate_many(prim, ts, 1)
        clear = signed_distance(world, pos)
        outcome = None
        hit = np.flatnonzero(clear < r)
        near_goal = np.flatnonzero(np.linalg.norm(pos - goal, axis=1) < trial.goal_tolerance)
        cut = len(ts)
        if len(hit) and (not len(near_goal) or hit[0] <= near_goal[0]):
            cut, outcome = hit[0] + 1, "collided"
        elif len(near_goal):
            cut, outcome = near_goal[0] + 1, "reached"
        run = float(ts[cut - 1])
        log.records.append(StepRecord(t, state, res, prim, run, t + ts[:cut], pos[:cut], vel[:cut], clear[:cut],
                                      depth_ref=f"frame_{step:05d}"))
        t += run
        step += 1
        if outcome is not None:
            log.outcome = outcome
            break
        p, v, a, _ = evaluate(prim, run)
        new_yaw = heading_of(prim, state.yaw)
        if res.used_fallback and np.linalg.norm(v) < 0.05:
            # stopped and boxed in: turn in place toward the goal side to look for an opening
            bearing = math.atan2(goal[1] - p[1], goal[0] - p[0])
            turn = 1.0 if _wrap(bearing - state.yaw) >= 0 else -1.0
            new_yaw = _wrap(state.yaw + turn * SCAN_RATE * run)
        state = KinodynamicState(p, v, a, new_yaw)
    return log
