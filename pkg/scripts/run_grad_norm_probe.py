#!/usr/bin/env python3
"""Stabilization probe: waiting-agent policy-gradient norms under the two
critic-target rules.

Trains iuur at desk scale with the probe enabled and summarizes how often
the value-fixing targets left the waiting agents' policy gradient smaller
than all-Bellman targets would have.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from marlab.harness import desk_profile, run_training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default="spread3",
                        choices=["spread3", "spread10", "pp3v1", "pp6v2"])
    parser.add_argument("--episodes", type=int, default=2000)
    parser.add_argument("--k", type=int, default=100)
    parser.add_argument("--probe-every", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/probe")
    args = parser.parse_args()

    cfg = desk_profile(
        scenario=args.scenario, algo="iuur", episodes=args.episodes, k=args.k,
        probe_every=args.probe_every, seed=args.seed, out=args.out,
    )
    art = run_training(cfg)
    probes = art.probe_history
    if not probes:
        print("no probe windows recorded (run too short?)")
        return
    wins = sum(1 for _, nf, nb in probes if nf < nb)
    print(f"windows: {len(probes)}")
    print(f"norm_fixed < norm_bellman: {wins} ({wins / len(probes):.0%})")
    for episode, nf, nb in probes:
        marker = "<" if nf < nb else ">="
        print(f"  episode {episode:6d}: fixed {nf:.3e} {marker} bellman {nb:.3e}")
    print(f"probe CSV: {art.probe_csv}")


if __name__ == "__main__":
    main()
