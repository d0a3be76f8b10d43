#!/usr/bin/env python3
"""Desk-scale comparison of maddpg / iu / iuur on one scenario.

Runs each algorithm for the requested seeds and leaves one run directory per
(algo, seed) under --out, each holding rewards.csv, eval.csv, timing.csv and
a checkpoint. Aggregate or plot the CSVs with whatever you like.

Example:
    python scripts/run_comparison.py --scenario spread3 --seeds 0 1 2
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from marlab.harness import desk_profile, run_training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="spread3",
                        choices=["spread3", "spread10", "pp3v1", "pp6v2"])
    parser.add_argument("--algos", nargs="+", default=["maddpg", "iu", "iuur"])
    parser.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    parser.add_argument("--episodes", type=int, default=5000)
    parser.add_argument("--out", default="runs/comparison")
    args = parser.parse_args()

    for algo in args.algos:
        for seed in args.seeds:
            out = Path(args.out) / f"{args.scenario}-{algo}-seed{seed}"
            cfg = desk_profile(scenario=args.scenario, algo=algo, seed=seed,
                               episodes=args.episodes,
                               k=max(1, min(250, args.episodes)), out=str(out))
            print(f"== {algo} seed {seed} -> {out}")
            art = run_training(cfg)
            if art.eval_history:
                final = float(np.mean(art.eval_history[-1][1]))
                print(f"   final eval mean return: {final:.2f} "
                      f"({art.total_seconds:.0f}s)")


if __name__ == "__main__":
    main()
