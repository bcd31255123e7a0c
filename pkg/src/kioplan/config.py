"""JSON run configuration with sections world, camera, planner, safety, losses, training and bench.

Every key is optional; missing keys take the library defaults and unknown
keys are an error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .camera import Camera, CameraExtrinsics, Intrinsics
from .harness.bench import BenchConfig
from .micronet.train import TrainConfig
from .objectives import GuidanceConfig, LossWeights
from .planner import PlannerConfig
from .shield import PhysicalEnvelope, SafetyParams
from .world import WorldGenConfig

SECTIONS = ("world", "camera", "planner", "safety", "losses", "training", "bench")

_CAMERA_KEYS = {"width": 96, "height": 72, "hfov_deg": 87.0, "max_range": 5.0}
_PLANNER_KEYS = {"p_max": 4.0, "v_max": 2.0, "a_max": 6.0}
_TRAINING_KEYS = {"worlds": 4, "frames_per_world": 16, "batch_size": None, "v_max": 3.0, "net_seed": 0}
_BENCH_SKIP = {"world", "planner", "base_seed", "camera", "max_range"}


def _names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


def _check(section: str, given: dict, allowed: set[str]) -> None:
    extra = sorted(set(given) - allowed)
    if extra:
        raise ValueError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _tuplify(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


@dataclass
class RunConfig:
    world: dict = field(default_factory=dict)
    camera: dict = field(default_factory=dict)
    planner: dict = field(default_factory=dict)
    safety: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)

    def __post_init__(self):
        _check("world", self.world, _names(WorldGenConfig))
        _check("camera", self.camera, set(_CAMERA_KEYS))
        _check("planner", self.planner, (_names(PlannerConfig) - {"envelope", "safety", "guidance"}) | set(_PLANNER_KEYS))
        _check("safety", self.safety, _names(SafetyParams))
        _check("losses", self.losses, _names(LossWeights) | _names(GuidanceConfig))
        _check("training", self.training, {"steps", "lr", "betas", "eps"} | set(_TRAINING_KEYS))
        _check("bench", self.bench, _names(BenchConfig) - _BENCH_SKIP)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _check("config", data, set(SECTIONS))
        return cls(**{k: dict(v) for k, v in data.items()})

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {s: getattr(self, s) for s in SECTIONS}

    def world_config(self) -> WorldGenConfig:
        cfg = WorldGenConfig(**_tuplify(self.world))
        cfg.validate()
        return cfg

    def camera_config(self) -> Camera:
        c = {**_CAMERA_KEYS, **self.camera}
        return Camera(Intrinsics.from_fov(int(c["width"]), int(c["height"]), float(c["hfov_deg"])), CameraExtrinsics())

    @property
    def max_range(self) -> float:
        return float({**_CAMERA_KEYS, **self.camera}["max_range"])

    def safety_params(self) -> SafetyParams:
        return replace(PlannerConfig().safety, **self.safety)

    def guidance_config(self) -> GuidanceConfig:
        return GuidanceConfig(**{k: v for k, v in self.losses.items() if k in _names(GuidanceConfig)})

    def loss_weights(self) -> LossWeights:
        return LossWeights(**{k: v for k, v in self.losses.items() if k in _names(LossWeights)})

    def planner_config(self) -> PlannerConfig:
        env = {**_PLANNER_KEYS, **{k: v for k, v in self.planner.items() if k in _PLANNER_KEYS}}
        rest = {k: v for k, v in self.planner.items() if k not in _PLANNER_KEYS}
        return PlannerConfig(envelope=PhysicalEnvelope(**env), safety=self.safety_params(),
                             guidance=self.guidance_config(), **rest)

    def train_config(self) -> TrainConfig:
        t = {**_TRAINING_KEYS, **self.training}
        core = _tuplify({k: v for k, v in self.training.items() if k in {"steps", "lr", "betas", "eps"}})
        p = self.planner_config()
        # the loss uses the pixel-level margin only; the clearance check is a planner filter
        return TrainConfig(**core, duration=p.duration, waypoints=p.M,
                           envelope=replace(p.envelope, v_max=float(t["v_max"])),
                           safety=replace(self.safety_params(), clearance_check=False),
                           weights=self.loss_weights(), guidance=self.guidance_config(),
                           camera=self.camera_config())

    def training_value(self, key: str):
        return {**_TRAINING_KEYS, **self.training}[key]

    def bench_config(self, seed: int = 0) -> BenchConfig:
        return BenchConfig(**_tuplify(self.bench), base_seed=seed, world=self.world_config(),
                           planner=self.planner_config(), camera=self.camera_config(), max_range=self.max_range)
