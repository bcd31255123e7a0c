import json

import numpy as np
import pytest

from kioplan.camera import read_pfm
from kioplan.cli import build_parser, main
from kioplan.config import RunConfig
from kioplan.gradcheck import check_bound_activation, check_losses, relative_error
from kioplan.world import World

SMALL_WORLD = {"extent": [30.0, 30.0, 8.0], "wall_count": 20}


def write_config(tmp_path, **sections):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(sections))
    return path


def test_defaults_match_library():
    cfg = RunConfig()
    assert cfg.planner_config().K == 5
    assert cfg.max_range == 5.0
    assert cfg.camera_config().intrinsics.width == 96
    assert cfg.train_config().envelope.v_max == 3.0
    assert not cfg.train_config().safety.clearance_check
    assert cfg.bench_config(7).base_seed == 7


def test_sections_map_onto_configs():
    cfg = RunConfig.from_dict({
        "world": {"wall_count": 12, "extent": [40, 40, 10]},
        "camera": {"width": 64, "height": 48, "max_range": 8.0},
        "planner": {"K": 7, "v_max": 2.5},
        "safety": {"radius": 0.25, "oov_policy": "permissive"},
        "losses": {"safety": 2.0, "lateral_tolerance": 1.0},
        "training": {"steps": 5, "betas": [0.8, 0.9]},
        "bench": {"n_trials": 3, "tiers": [2.0, 3.0]},
    })
    assert cfg.world_config().extent == (40, 40, 10)
    assert cfg.camera_config().intrinsics.height == 48 and cfg.max_range == 8.0
    p = cfg.planner_config()
    assert p.K == 7 and p.envelope.v_max == 2.5 and p.safety.radius == 0.25
    assert p.guidance.lateral_tolerance == 1.0
    t = cfg.train_config()
    assert t.steps == 5 and t.betas == (0.8, 0.9) and t.weights.safety == 2.0
    b = cfg.bench_config()
    assert b.n_trials == 3 and b.tiers == (2.0, 3.0) and b.world.wall_count == 12


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown"):
        RunConfig.from_dict({"planer": {}})
    with pytest.raises(ValueError, match="world"):
        RunConfig.from_dict({"world": {"walls": 3}})


def test_parser_accepts_globals_on_either_side():
    a = build_parser().parse_args(["--seed", "4", "gen-world", "--out", "x"])
    b = build_parser().parse_args(["gen-world", "--seed", "4", "--out", "x"])
    assert (a.seed, a.out) == (b.seed, b.out) == (4, "x")


def test_gen_world_render_plan(tmp_path, capsys):
    cfg = write_config(tmp_path, world=SMALL_WORLD)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--seed", "3", "--out", str(out), "gen-world"]) == 0
    w = World.load(out / "world_3.json")
    assert len(w.walls) == 20
    assert main(["render", "--config", str(cfg), "--out", str(out), "--world", str(out / "world_3.json"),
                 "--position", "1", "1", "4", "--yaw-deg", "45"]) == 0
    img = read_pfm(out / "depth.pfm")
    assert img.values.shape == (72, 96)
    side = json.loads((out / "depth.json").read_text())
    assert set(side) == {"intrinsics", "pose", "max_range"}
    assert main(["plan", "--out", str(out), "--world", str(out / "world_3.json"), "--position", "1", "1", "4",
                 "--goal", "10", "10", "4"]) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert len(plan["verdicts"]) == 5


def test_simulate_writes_jsonl(tmp_path):
    cfg = write_config(tmp_path, world={"extent": [30.0, 30.0, 8.0], "wall_count": 0}, bench={"sampler_K": 6})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--start", "5", "5", "4",
                 "--goal", "10", "5", "4", "--timeout", "10"]) == 0
    lines = (out / "trial_sampler_0.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["outcome"] == "reached"


def test_train_writes_curve_and_checkpoint(tmp_path):
    cfg = write_config(tmp_path, world={"extent": [20.0, 20.0, 6.0], "wall_count": 8},
                       training={"steps": 2, "worlds": 1, "frames_per_world": 2})
    out = tmp_path / "out"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "loss_curve.csv").read_text().splitlines()
    assert rows[0] == "step,total,smooth,safety,guidance" and len(rows) == 3
    assert (out / "policy.kio").read_bytes()[:4] == b"KIO1"


def test_relative_error_floor():
    assert relative_error([1e-12], [0.0]) == pytest.approx(1e-4)
    assert relative_error([1.0, 2.0], [1.0, 2.5]) == pytest.approx(0.2)


def test_gradchecks_pass():
    assert check_bound_activation().ok
    for r in check_losses():
        assert r.ok, (r.name, r.error)
