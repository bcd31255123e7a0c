"""Shield on/off ablation with the sampler planner at one speed tier.

Usage: python3 scripts/run_ablation.py [--trials 50] [--tier 2.0] [--workers 1] [--out ablation]
"""

import argparse
import time

from kioplan.harness import BenchConfig, run_benchmark


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--tier", type=float, default=2.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="ablation")
    args = p.parse_args()
    cfg = BenchConfig(methods=("sampler", "sampler_no_shield"), tiers=(args.tier,), n_trials=args.trials,
                      base_seed=args.seed, workers=args.workers)
    t0 = time.perf_counter()
    _, cells = run_benchmark(cfg, args.out)
    for c in cells:
        print(f"{c.method:>18}  {c.counts}  mean min_dist {c.min_dist_all:.3f} m  "
              f"mean latency {c.means['latency_ms']:.1f} ms")
    print(f"{time.perf_counter() - t0:.0f} s; CSVs in {args.out}/")


if __name__ == "__main__":
    main()
