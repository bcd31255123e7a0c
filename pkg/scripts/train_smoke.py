"""200-step training run on a 64-frame generated dataset; prints the loss every 20 steps.

Usage: python3 scripts/train_smoke.py [--steps 200] [--out smoke]
"""

import argparse
from pathlib import Path

from kioplan.harness import generate_dataset
from kioplan.micronet import PolicyConfig, PolicyNet, TrainConfig, save_checkpoint, train
from kioplan.world import WorldGenConfig


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="smoke")
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_dataset(range(args.seed, args.seed + 4), 16, WorldGenConfig())
    net = PolicyNet(PolicyConfig(seed=args.seed))

    def log(step, br):
        if step % 20 == 0 or step == args.steps - 1:
            print(f"step {step + 1:4d}  total {br.total:+.5f}  smooth {br.smooth:8.3f}  safety {br.safety:.5f}  "
                  f"guidance {br.guidance:+.4f}", flush=True)

    hist = train(net, data, TrainConfig(steps=args.steps), out / "loss_curve.csv", seed=args.seed, log=log)
    save_checkpoint(net, out / "policy.kio")
    print(f"total {hist[0].total:.5f} -> {hist[-1].total:.5f} "
          f"({100 * (1 - hist[-1].total / hist[0].total):.1f}% drop)")


if __name__ == "__main__":
    main()
