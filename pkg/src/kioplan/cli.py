"""Command-line entry point: ``kioplan <subcommand> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .camera import BodyPose, render_depth, write_depth_dump
from .config import RunConfig
from .primitives import KinodynamicState
from .world import World, generate_world

log = logging.getLogger("kioplan")


def _world(args, cfg: RunConfig) -> World:
    if getattr(args, "world", None):
        return World.load(args.world)
    return generate_world(cfg.world_config(), args.seed)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_world(args, cfg: RunConfig) -> int:
    world = generate_world(cfg.world_config(), args.seed)
    path = _out(args) / f"world_{args.seed}.json"
    world.save(path)
    print(f"{path} ({len(world.walls)} walls)")
    return 0


def cmd_render(args, cfg: RunConfig) -> int:
    world = _world(args, cfg)
    cam = cfg.camera_config()
    pose = BodyPose.from_yaw(np.array(args.position, dtype=float), math.radians(args.yaw_deg))
    image = render_depth(world, pose, cam.intrinsics, cam.extrinsics, cfg.max_range)
    pfm, side = write_depth_dump(_out(args) / args.name, image, pose, cam.intrinsics)
    print(pfm)
    print(side)
    return 0


def cmd_plan(args, cfg: RunConfig) -> int:
    from .planner import plan_step

    world = _world(args, cfg)
    cam = cfg.camera_config()
    yaw = math.radians(args.yaw_deg)
    state = KinodynamicState(np.array(args.position, float), np.array(args.velocity, float), yaw=yaw)
    pose = BodyPose.from_yaw(state.position, yaw)
    image = render_depth(world, pose, cam.intrinsics, cam.extrinsics, cfg.max_range)
    pcfg = cfg.planner_config()
    net = None
    if args.source == "network":
        net = _load_net(args, cfg, pcfg.K)
    res = plan_step(image, state, np.array(args.goal, float), args.source, pcfg, cam, net, seed=args.seed, pose=pose)
    path = _out(args) / "plan.json"
    path.write_text(json.dumps(res.to_dict(), indent=1) + "\n")
    print(f"chosen={res.chosen_index} fallback={res.used_fallback} -> {path}")
    return 0


def _load_net(args, cfg: RunConfig, K: int):
    from .micronet import PolicyConfig, PolicyNet, load_checkpoint

    cam = cfg.camera_config()
    net = PolicyNet(PolicyConfig(K=K, width=cam.intrinsics.width, height=cam.intrinsics.height,
                                 max_range=cfg.max_range, seed=cfg.training_value("net_seed")))
    if args.checkpoint:
        load_checkpoint(net, args.checkpoint)
    else:
        log.warning("no --checkpoint given; using an untrained network")
    return net


def cmd_simulate(args, cfg: RunConfig) -> int:
    from dataclasses import replace

    from .harness.bench import sample_start_goal
    from .harness.metrics import compute_metrics
    from .harness.simulate import TrialConfig, simulate_trial

    world = _world(args, cfg)
    pcfg = cfg.planner_config()
    if args.start and args.goal:
        start, goal = np.array(args.start, float), np.array(args.goal, float)
    else:
        bench = cfg.bench_config(args.seed)
        rng = np.random.default_rng([args.seed, 1])
        start, goal = sample_start_goal(world, rng, pcfg.safety.margin, bench.min_separation, bench.max_separation)
    trial = TrialConfig(world_seed=world.seed, tier=args.tier, start=tuple(start), goal=tuple(goal),
                        method=args.method, replan_rate=pcfg.replan_rate, timeout=args.timeout,
                        sampler_seed=args.seed)
    net = _load_net(args, cfg, pcfg.K) if trial.source == "network" else None
    if trial.source == "sampler":
        pcfg = replace(pcfg, K=cfg.bench_config().sampler_K)
    tlog = simulate_trial(trial, world, net, pcfg, cfg.camera_config(), cfg.max_range)
    path = _out(args) / f"trial_{args.method}_{args.seed}.jsonl"
    tlog.write(path)
    m = compute_metrics(tlog)
    print(f"{m.outcome}: path={m.path_length_m:.2f} m min_dist={m.min_dist_m:.3f} m -> {path}")
    return 0


def cmd_bench(args, cfg: RunConfig) -> int:
    from .harness.bench import run_benchmark

    bcfg = cfg.bench_config(args.seed)
    if args.trials is not None:
        from dataclasses import replace

        bcfg = replace(bcfg, n_trials=args.trials)
    out = _out(args)
    _, cells = run_benchmark(bcfg, out)
    for c in cells:
        print(f"{c.method:>18} tier={c.tier:.1f} " + " ".join(f"{k}={v}" for k, v in c.counts.items())
              + f" min_dist_all={c.min_dist_all:.3f}")
    print(out / "trials.csv")
    print(out / "summary.csv")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    from .harness.dataset import generate_dataset
    from .micronet import PolicyConfig, PolicyNet, save_checkpoint, train

    tcfg = cfg.train_config()
    pcfg = cfg.planner_config()
    seeds = range(args.seed, args.seed + int(cfg.training_value("worlds")))
    data = generate_dataset(seeds, int(cfg.training_value("frames_per_world")), cfg.world_config(),
                            cfg.camera_config(), pcfg.safety.radius, cfg.max_range)
    cam = cfg.camera_config()
    net = PolicyNet(PolicyConfig(K=pcfg.K, width=cam.intrinsics.width, height=cam.intrinsics.height,
                                 max_range=cfg.max_range, seed=cfg.training_value("net_seed")))
    out = _out(args)

    def report(step, br):
        if step % 10 == 0 or step == tcfg.steps - 1:
            log.info("step %d total %.6f smooth %.4f safety %.6f guidance %.4f", step + 1, br.total, br.smooth,
                     br.safety, br.guidance)

    hist = train(net, data, tcfg, out / "loss_curve.csv", cfg.training_value("batch_size"), args.seed, report)
    save_checkpoint(net, out / "policy.kio")
    first, last = hist[0].total, hist[-1].total
    print(f"loss {first:.6f} -> {last:.6f}; wrote {out / 'loss_curve.csv'} and {out / 'policy.kio'}")
    return 0


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    from .gradcheck import run_all

    results = run_all(args.seed)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name:<20} err={r.error:.3e} tol={r.tolerance:.0e}")
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    def globals_(suppress: bool) -> argparse.ArgumentParser:
        # subcommands accept the global flags too; SUPPRESS keeps them from clobbering earlier values
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--config", type=Path, default=d(None), help="JSON config file")
        g.add_argument("--seed", type=int, default=d(0))
        g.add_argument("--out", default=d("out"), help="output directory")
        g.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return g

    common = globals_(True)
    p = argparse.ArgumentParser(prog="kioplan", description=__doc__, parents=[globals_(False)])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=fn)
        return sp

    add("gen-world", cmd_gen_world, "generate a world and write its JSON")

    sp = add("render", cmd_render, "render a depth frame to PFM plus a JSON sidecar")
    sp.add_argument("--world", type=Path, help="world JSON (default: generate from --seed)")
    sp.add_argument("--position", type=float, nargs=3, required=True)
    sp.add_argument("--yaw-deg", type=float, default=0.0)
    sp.add_argument("--name", default="depth")

    sp = add("plan", cmd_plan, "run one planning step and write the result as JSON")
    sp.add_argument("--world", type=Path)
    sp.add_argument("--position", type=float, nargs=3, required=True)
    sp.add_argument("--velocity", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    sp.add_argument("--yaw-deg", type=float, default=0.0)
    sp.add_argument("--goal", type=float, nargs=3, required=True)
    sp.add_argument("--source", choices=("sampler", "network"), default="sampler")
    sp.add_argument("--checkpoint", type=Path)

    sp = add("simulate", cmd_simulate, "fly one closed-loop trial and write its JSONL log")
    sp.add_argument("--world", type=Path)
    sp.add_argument("--method", choices=("net", "net_no_shield", "sampler", "sampler_no_shield"), default="sampler")
    sp.add_argument("--tier", type=float, default=2.0)
    sp.add_argument("--start", type=float, nargs=3)
    sp.add_argument("--goal", type=float, nargs=3)
    sp.add_argument("--timeout", type=float, default=120.0)
    sp.add_argument("--checkpoint", type=Path)

    sp = add("bench", cmd_bench, "run the seeded benchmark and write trials.csv / summary.csv")
    sp.add_argument("--trials", type=int, help="override bench.n_trials")

    add("train", cmd_train, "generate a dataset, train the policy, write loss curve and checkpoint")
    add("gradcheck", cmd_gradcheck, "finite-difference checks of every analytic gradient")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return args.func(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
