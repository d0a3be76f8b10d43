"""Command-line front end: train, eval, bench-interaction, bench-training.

Every training option can come from a JSON config file (--config) whose keys
match the flag names; explicit flags override the file, and the file
overrides the chosen profile's defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .algos import load_population
from .envs import EnvConfig, ParticleEnv, write_trajectory
from .harness import (
    RunConfig,
    bench_interaction,
    bench_training,
    desk_profile,
    evaluate,
    run_training,
    write_timing_csv,
)

_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def _add_train_flags(p):
    p.add_argument("--config", type=Path, help="JSON file mirroring these flags")
    p.add_argument("--profile", choices=["full", "desk"], default="full",
                   help="base defaults: full run or desk-scale run")
    p.add_argument("--scenario", choices=["spread3", "spread10", "pp3v1", "pp6v2"])
    p.add_argument("--algo", choices=["maddpg", "iu", "iuur"])
    p.add_argument("--episodes", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--buffer", type=int)
    p.add_argument("--actor-lr", dest="actor_lr", type=float)
    p.add_argument("--critic-lr", dest="critic_lr", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--warmup", type=int)
    p.add_argument("--update-every", dest="update_every", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--eval-episodes", dest="eval_episodes", type=int)
    p.add_argument("--probe-every", dest="probe_every", type=int)
    p.add_argument("--probe-steps", dest="probe_steps", type=int)
    p.add_argument("--grad-clip", dest="grad_clip", type=float)


def build_run_config(args) -> RunConfig:
    cfg = desk_profile() if args.profile == "desk" else RunConfig()
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        unknown = set(overrides) - _FIELDS
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **overrides)
    flag_overrides = {
        name: getattr(args, name)
        for name in _FIELDS
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(cfg, **flag_overrides).validate()


def cmd_train(args):
    cfg = build_run_config(args)
    art = run_training(cfg)
    print(f"run complete: {cfg.algo} on {cfg.scenario}, seed {cfg.seed}")
    print(f"rewards: {art.rewards_csv}")
    print(f"eval:    {art.eval_csv}")
    print(f"timing:  {art.timing_csv}")
    if art.probe_csv:
        print(f"probe:   {art.probe_csv}")
    print(f"checkpoint: {art.checkpoint_dir}")
    print(f"total wall-clock: {art.total_seconds:.1f}s")
    return 0


def cmd_eval(args):
    pop, manifest = load_population(args.checkpoint)
    scenario = manifest["scenario"]
    means = evaluate(pop, scenario, args.episodes, args.seed, steps=args.steps)
    print(f"scenario {scenario}, {args.episodes} noiseless episodes, seed {args.seed}")
    for agent_id, m in enumerate(means):
        print(f"agent {agent_id}: mean return {m:.4f}")
    print(f"overall mean: {float(np.mean(means)):.4f}")
    if args.dump_traj:
        env = ParticleEnv(EnvConfig(scenario=scenario, episode_length=args.steps))
        rng = np.random.default_rng(args.seed)
        state, obs = env.reset(rng)
        states = [state]
        done = False
        while not done:
            actions = pop.select_actions(obs, mode="exploit")
            state, _, obs, done = env.step(state, actions)
            states.append(state)
        write_trajectory(args.dump_traj, states)
        print(f"trajectory written to {args.dump_traj}")
    return 0


def cmd_bench_interaction(args):
    reports = bench_interaction(args.scenario, steps=args.steps, seed=args.seed)
    unified = next(r for r in reports if r.layout == "unified")
    per_agent = next(r for r in reports if r.layout == "per_agent")
    for r in reports:
        print(f"{r.layout:>10}: {r.mean_seconds * 1e6:9.2f} us/step "
              f"({r.samples} steps)")
    print(f"speedup (per-agent / unified): "
          f"{per_agent.mean_seconds / unified.mean_seconds:.2f}x")
    if args.out:
        write_timing_csv(args.out, reports)
        print(f"timing written to {args.out}")
    return 0


def cmd_bench_training(args):
    algos = args.algos.split(",")
    results = bench_training(
        args.scenario, args.episodes, algos=algos, seed=args.seed,
        batch=args.batch, rounds=args.rounds, out=args.out,
    )
    for algo, report, total in results:
        print(f"{algo:>8}: {report.mean_seconds * 1e3:9.2f} ms/episode, "
              f"total {total:.2f}s over {args.episodes} episodes")
    if len(results) == 2:
        (_, _, t0), (_, _, t1) = results
        print(f"wall-clock ratio ({algos[0]} / {algos[1]}): {t0 / t1:.2f}x")
    if args.out:
        print(f"timing written to {args.out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="marlab",
        description="Multi-agent RL lab: MADDPG / IU / IUUR on particle worlds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one seeded training run")
    _add_train_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved population")
    p_eval.add_argument("--checkpoint", required=True, type=Path)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--steps", type=int, default=25)
    p_eval.add_argument("--dump-traj", dest="dump_traj", type=Path,
                        help="write the first eval episode as CSV")
    p_eval.set_defaults(func=cmd_eval)

    p_bi = sub.add_parser("bench-interaction",
                          help="batched vs sequential action-computation timing")
    p_bi.add_argument("--scenario", required=True,
                      choices=["spread3", "spread10", "pp3v1", "pp6v2"])
    p_bi.add_argument("--steps", type=int, default=10_000)
    p_bi.add_argument("--seed", type=int, default=0)
    p_bi.add_argument("--out", type=Path)
    p_bi.set_defaults(func=cmd_bench_interaction)

    p_bt = sub.add_parser("bench-training",
                          help="equal-episode wall-clock comparison across algorithms")
    p_bt.add_argument("--scenario", required=True,
                      choices=["spread3", "spread10", "pp3v1", "pp6v2"])
    p_bt.add_argument("--episodes", type=int, default=120)
    p_bt.add_argument("--algos", default="maddpg,iuur")
    p_bt.add_argument("--seed", type=int, default=0)
    p_bt.add_argument("--batch", type=int, default=128)
    p_bt.add_argument("--rounds", type=int, default=1)
    p_bt.add_argument("--out", type=Path)
    p_bt.set_defaults(func=cmd_bench_training)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
