"""Seeded benchmark over methods x speed tiers x trials, written as CSV."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..camera import Camera
from ..planner import PlannerConfig
from ..world import World, WorldGenConfig, generate_world, sample_free_point
from .metrics import Metrics, compute_metrics
from .simulate import TrialConfig, simulate_trial

TRIAL_COLUMNS = ["method", "tier", "latency_ms", "path_length_m", "avg_speed_mps", "max_speed_mps",
                 "min_dist_m", "smoothness", "outcome"]
METRIC_COLUMNS = TRIAL_COLUMNS[2:8]
OUTCOMES = ("reached", "collided", "timeout")


@dataclass(frozen=True)
class BenchConfig:
    methods: tuple[str, ...] = ("sampler", "sampler_no_shield")
    tiers: tuple[float, ...] = (2.0,)
    n_trials: int = 50
    base_seed: int = 0
    min_separation: float = 40.0
    max_separation: float | None = None
    timeout_factor: float = 3.0
    min_timeout: float = 60.0
    workers: int = 1
    timing: bool = True
    world: WorldGenConfig = WorldGenConfig()
    planner: PlannerConfig = PlannerConfig()
    sampler_K: int = 24
    checkpoint: str | None = None
    net_seed: int = 0
    camera: Camera | None = None
    max_range: float = 5.0


@dataclass(frozen=True)
class TrialRow:
    trial_id: int
    method: str
    tier: float
    metrics: Metrics


def sample_start_goal(world: World, rng, clearance: float, min_sep: float, max_sep: float | None = None,
                      max_tries: int = 1000):
    for _ in range(max_tries):
        s = sample_free_point(world, rng, clearance)
        g = sample_free_point(world, rng, clearance)
        d = np.linalg.norm(g[:2] - s[:2])
        if d >= min_sep and (max_sep is None or d <= max_sep):
            return s, g
    raise RuntimeError("could not sample a start/goal pair with the requested separation")


def trial_specs(cfg: BenchConfig) -> list[TrialConfig]:
    """Every (trial, method, tier) combination; a trial id fixes world, start and goal for all arms."""
    if cfg.n_trials < 1:
        raise ValueError("need at least one trial")
    clearance = cfg.planner.safety.radius + cfg.planner.safety.buffer
    specs = []
    for i in range(cfg.n_trials):
        seed = cfg.base_seed + i
        world = generate_world(cfg.world, seed)
        rng = np.random.default_rng([seed, 1])
        s, g = sample_start_goal(world, rng, clearance, cfg.min_separation, cfg.max_separation)
        dist = float(np.linalg.norm(g - s))
        for method in cfg.methods:
            for tier in cfg.tiers:
                timeout = max(cfg.min_timeout, cfg.timeout_factor * dist / tier)
                specs.append(TrialConfig(world_seed=seed, tier=tier, start=tuple(s), goal=tuple(g), method=method,
                                         replan_rate=cfg.planner.replan_rate, timeout=round(timeout, 1),
                                         sampler_seed=seed, trial_id=i))
    return specs


def _net_for(cfg: BenchConfig):
    from ..micronet import PolicyConfig, PolicyNet, load_checkpoint

    cam = cfg.camera or Camera()
    net = PolicyNet(PolicyConfig(K=cfg.planner.K, width=cam.intrinsics.width, height=cam.intrinsics.height,
                                 max_range=cfg.max_range, seed=cfg.net_seed))
    if cfg.checkpoint:
        load_checkpoint(net, cfg.checkpoint)
    return net


def run_trial(args) -> TrialRow:
    trial, cfg = args
    world = generate_world(cfg.world, trial.world_seed)
    planner = cfg.planner
    net = None
    if trial.source == "network":
        net = _net_for(cfg)
    else:
        planner = replace(planner, K=cfg.sampler_K)
    log = simulate_trial(trial, world, net, planner, cfg.camera, cfg.max_range)
    return TrialRow(trial.trial_id, trial.method, trial.tier, compute_metrics(log))


def run_trials(cfg: BenchConfig) -> list[TrialRow]:
    """Run every trial, serially or on a process pool; rows come back in a fixed sorted order."""
    jobs = [(s, cfg) for s in trial_specs(cfg)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(run_trial, jobs))
    else:
        rows = [run_trial(j) for j in jobs]
    method_rank = {m: i for i, m in enumerate(cfg.methods)}
    return sorted(rows, key=lambda r: (method_rank[r.method], r.tier, r.trial_id))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def trials_csv(rows: list[TrialRow], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in rows:
        m = r.metrics
        w.writerow([r.method, _fmt(r.tier), _fmt(m.latency_ms) if timing else "NA", _fmt(m.path_length_m),
                    _fmt(m.avg_speed_mps), _fmt(m.max_speed_mps), _fmt(m.min_dist_m), _fmt(m.smoothness),
                    m.outcome])
    return buf.getvalue()


@dataclass
class CellSummary:
    method: str
    tier: float
    counts: dict[str, int]
    means: dict[str, float]
    min_dist_all: float
    rows: list[TrialRow] = field(default_factory=list)


def aggregate(rows: list[TrialRow]) -> list[CellSummary]:
    """Per (method, tier): means over reached trials plus outcome counts.

    ``min_dist_all`` is the mean minimum distance over every trial,
    including collisions and timeouts.
    """
    cells: dict[tuple[str, float], list[TrialRow]] = {}
    for r in rows:
        cells.setdefault((r.method, r.tier), []).append(r)
    out = []
    for (method, tier), rs in cells.items():
        counts = {o: sum(r.metrics.outcome == o for r in rs) for o in OUTCOMES}
        ok = [r for r in rs if r.metrics.outcome == "reached"]
        means = {c: (float(np.mean([getattr(r.metrics, c) for r in ok])) if ok else float("nan"))
                 for c in METRIC_COLUMNS}
        out.append(CellSummary(method, tier, counts, means,
                               float(np.mean([r.metrics.min_dist_m for r in rs])), rs))
    return out


def summary_csv(cells: list[CellSummary], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "tier", "n_trials", *OUTCOMES, *METRIC_COLUMNS, "min_dist_all_m"])
    for c in cells:
        vals = [("NA" if (col == "latency_ms" and not timing) else _fmt(c.means[col])) for col in METRIC_COLUMNS]
        w.writerow([c.method, _fmt(c.tier), len(c.rows), *[c.counts[o] for o in OUTCOMES], *vals,
                    _fmt(c.min_dist_all)])
    return buf.getvalue()


def run_benchmark(cfg: BenchConfig, out_dir=None):
    """Run the suite; optionally write ``trials.csv`` and ``summary.csv`` into ``out_dir``."""
    rows = run_trials(cfg)
    cells = aggregate(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trials.csv").write_text(trials_csv(rows, cfg.timing))
        (out / "summary.csv").write_text(summary_csv(cells, cfg.timing))
    return rows, cells
