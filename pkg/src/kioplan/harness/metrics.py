"""Per-trial metrics mirroring the benchmark table columns."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..primitives import jerk_integral
from .simulate import TrialLog


@dataclass(frozen=True)
class Metrics:
    latency_ms: float
    path_length_m: float
    avg_speed_mps: float
    max_speed_mps: float
    min_dist_m: float
    smoothness: float
    outcome: str

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(log: TrialLog) -> Metrics:
    """Summarise an executed flight.

    Path length and speeds come from the executed samples, minimum
    distance from the true-world clearance at those samples, and
    smoothness is the time-averaged squared jerk of the executed portion of
    every primitive (units m^2/s^6).
    """
    positions = [log.start.position[None]]
    speeds = [np.linalg.norm(log.start.velocity)]
    clearance = [log.start_clearance]
    latencies = []
    jerk_sq = 0.0
    for rec in log.records:
        positions.append(rec.positions)
        speeds.extend(np.linalg.norm(rec.velocities, axis=1))
        clearance.extend(rec.clearance)
        if rec.plan is not None:
            latencies.append(rec.plan.elapsed_ms)
        jerk_sq += jerk_integral(rec.primitive, rec.executed)
    pts = np.concatenate(positions)
    path = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()) if len(pts) > 1 else 0.0
    T = log.duration
    return Metrics(
        latency_ms=float(np.mean(latencies)) if latencies else 0.0,
        path_length_m=path,
        avg_speed_mps=path / T if T > 0 else 0.0,
        max_speed_mps=float(np.max(speeds)),
        min_dist_m=float(np.min(clearance)),
        smoothness=jerk_sq / T if T > 0 else 0.0,
        outcome=log.outcome,
    )
