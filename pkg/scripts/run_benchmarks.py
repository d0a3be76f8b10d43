#!/usr/bin/env python3
"""Computational-efficiency benchmarks: interaction speed and training time.

Reports the per-step action-computation time of the unified (batched) layout
against the per-agent (sequential) layout on every scenario, then an
equal-episode wall-clock comparison of maddpg vs iuur. Only ratios are
meaningful across machines; absolute times are hardware-specific.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from marlab.harness import bench_interaction, bench_training, write_timing_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=10_000,
                        help="measured interaction steps per layout")
    parser.add_argument("--episodes", type=int, default=60,
                        help="episodes per training-time run")
    parser.add_argument("--out", default="runs/benchmarks")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_reports = []

    print("interaction time per environment step")
    for scenario in ("spread3", "spread10", "pp3v1", "pp6v2"):
        reports = bench_interaction(scenario, steps=args.steps)
        all_reports.extend(reports)
        uni = next(r for r in reports if r.layout == "unified")
        per = next(r for r in reports if r.layout == "per_agent")
        print(f"  {scenario:9s} unified {uni.mean_seconds*1e6:8.2f} us   "
              f"per-agent {per.mean_seconds*1e6:8.2f} us   "
              f"speedup {per.mean_seconds/uni.mean_seconds:5.2f}x")
    write_timing_csv(out / "interaction.csv", all_reports)

    print("training wall-clock, equal episode counts")
    training_reports = []
    for scenario in ("spread3", "pp3v1"):
        results = bench_training(scenario, episodes=args.episodes)
        totals = {algo: total for algo, _, total in results}
        training_reports.extend(r for _, r, _ in results)
        print(f"  {scenario:9s} maddpg {totals['maddpg']:7.2f}s   "
              f"iuur {totals['iuur']:7.2f}s   "
              f"ratio {totals['maddpg']/totals['iuur']:5.2f}x")
    write_timing_csv(out / "training.csv", training_reports)
    print(f"CSV written under {out}")


if __name__ == "__main__":
    main()
