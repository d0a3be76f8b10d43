"""Experiment harness: seeded training runs, evaluation, timing benchmarks.

A run is fully determined by its RunConfig: master seed -> independent
streams for weight init, environment resets, exploration noise, replay
sampling and probes, so two runs with the same config produce bit-identical
reward logs. Outputs are plain CSV; plotting and aggregation stay external.
"""

from __future__ import annotations

import csv
import json
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .algos import (
    ALGO_LAYOUT,
    AgentPopulation,
    LearnerSchedule,
    gradient_norm_probe,
    save_population,
    train_step,
)
from .envs import SCENARIOS, EnvConfig, ParticleEnv
from .nets import NumericsError
from .replay import ReplayBuffer, Transition

REWARD_HEADER = ["episode", "algo", "scenario", "seed", "agent_id", "episode_return"]
TIMING_HEADER = ["phase", "algo", "scenario", "layout", "mean_seconds", "samples"]
PROBE_HEADER = ["episode", "algo", "scenario", "seed", "norm_fixed", "norm_bellman"]


@dataclass
class RunConfig:
    """Everything one training run needs; defaults follow the reference
    setup (tau=0.01, K=5000, 100k episodes, 25-step episodes)."""

    scenario: str = "spread3"
    algo: str = "iuur"
    episodes: int = 100_000
    steps: int = 25
    k: int = 5000
    tau: float = 0.01
    gamma: float = 0.95
    batch: int = 1024
    buffer: int = 1_000_000
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    sigma: float = 0.1
    seed: int = 0
    out: str = "runs/run"
    warmup: int = 1024
    update_every: int = 1
    eval_every: int = 500
    eval_episodes: int = 10
    probe_every: int = 0
    probe_steps: int = 10
    grad_clip: float = 0.5
    env: dict = field(default_factory=dict)  # EnvConfig overrides (physics, rewards)

    def env_config(self):
        merged = dict(scenario=self.scenario, episode_length=self.steps,
                      seed=self.seed)
        merged.update(self.env)
        try:
            return EnvConfig(**merged)
        except TypeError as exc:
            raise ValueError(f"bad env override: {exc}") from exc

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.algo not in ALGO_LAYOUT:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        self.env_config()
        positive = ["episodes", "steps", "k", "batch", "buffer", "warmup",
                    "update_every", "eval_episodes"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.k > self.episodes:
            raise ValueError("learner period k cannot exceed the episode count")
        return self


def desk_profile(**overrides):
    """Laptop-scale profile: 5000 episodes, K=250, lighter update load."""
    base = dict(
        episodes=5000, k=250, batch=128, warmup=512, update_every=2,
        eval_every=250, probe_every=250,
    )
    base.update(overrides)
    return RunConfig(**base)


@dataclass
class TimingReport:
    phase: str          # interaction | training
    algo: str
    scenario: str
    layout: str
    mean_seconds: float  # per environment step (interaction) or episode (training)
    samples: int


@dataclass
class RunArtifacts:
    config: RunConfig
    out_dir: Path
    rewards_csv: Path
    timing_csv: Path
    eval_csv: Path
    probe_csv: Path | None
    checkpoint_dir: Path
    learner_history: list = field(default_factory=list)
    eval_history: list = field(default_factory=list)   # (episode, per-agent means)
    probe_history: list = field(default_factory=list)  # (episode, fixed, bellman)
    total_seconds: float = 0.0
    timing: list = field(default_factory=list)


def _row(values):
    return [v if isinstance(v, (str, int)) else repr(float(v)) for v in values]


def write_timing_csv(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_HEADER)
        for r in reports:
            writer.writerow(_row(
                [r.phase, r.algo, r.scenario, r.layout, r.mean_seconds, r.samples]
            ))


def run_training(cfg: RunConfig) -> RunArtifacts:
    """Execute the full training loop and write all run artifacts.

    Per episode: reset, then for every step select exploratory actions,
    advance the world, store the joint transition and (after warmup) do one
    critic/actor/target update on a sampled batch. Learner schedules advance
    at episode boundaries. Numeric failures abort with episode/step context,
    keeping whatever logs were already written.
    """
    cfg.validate()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    env = ParticleEnv(cfg.env_config())
    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    init_rng, env_rng, noise_rng, buf_rng, probe_rng = map(np.random.default_rng, streams)
    eval_seed = cfg.seed + 90_001  # fixed eval stream, identical at every cadence

    pop = AgentPopulation.for_env(
        env, cfg.algo, actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr,
        grad_clip=cfg.grad_clip, rng=init_rng
    )
    buf = ReplayBuffer(cfg.buffer, env.state_dim, env.n_agents, env.obs_dim,
                       env.act_dim)
    teams = env.teams()
    iterative = cfg.algo in ("iu", "iuur")
    scheds = (
        {t: LearnerSchedule(len(ids), cfg.k) for t, (_, ids) in enumerate(teams)}
        if iterative else None
    )

    art = RunArtifacts(
        config=cfg,
        out_dir=out_dir,
        rewards_csv=out_dir / "rewards.csv",
        timing_csv=out_dir / "timing.csv",
        eval_csv=out_dir / "eval.csv",
        probe_csv=(out_dir / "probe.csv"
                   if cfg.algo == "iuur" and cfg.probe_every > 0 else None),
        checkpoint_dir=out_dir / "checkpoint",
    )
    (out_dir / "config.json").write_text(json.dumps(asdict(cfg), indent=2))

    interact_time, interact_steps = 0.0, 0
    train_time, train_episodes = 0.0, 0
    total_steps = 0
    started = time.perf_counter()

    rewards_fh = open(art.rewards_csv, "w", newline="")
    eval_fh = open(art.eval_csv, "w", newline="")
    probe_fh = open(art.probe_csv, "w", newline="") if art.probe_csv else None
    rewards_writer = csv.writer(rewards_fh)
    rewards_writer.writerow(REWARD_HEADER)
    eval_writer = csv.writer(eval_fh)
    eval_writer.writerow(REWARD_HEADER)
    if probe_fh:
        probe_writer = csv.writer(probe_fh)
        probe_writer.writerow(PROBE_HEADER)

    def learner_map():
        return {t: teams[t][1][scheds[t].l - 1] for t in scheds} if scheds else None

    try:
        for episode in range(1, cfg.episodes + 1):
            state, obs = env.reset(env_rng)
            ep_return = np.zeros(env.n_agents)
            episode_trained = False
            learners = learner_map()
            if iterative:
                art.learner_history.append(
                    tuple(learners[t] for t in sorted(learners))
                )
            for step in range(1, cfg.steps + 1):
                try:
                    t0 = time.perf_counter()
                    actions = pop.select_actions(
                        obs, mode="explore", sigma=cfg.sigma, rng=noise_rng
                    )
                    nxt, rewards, nxt_obs, _ = env.step(state, actions)
                    buf.store(Transition(
                        state=env.global_state(state),
                        obs=obs,
                        actions=actions,
                        rewards=rewards,
                        next_state=env.global_state(nxt),
                        next_obs=nxt_obs,
                    ))
                    interact_time += time.perf_counter() - t0
                    interact_steps += 1
                    ep_return += rewards
                    state, obs = nxt, nxt_obs
                    total_steps += 1
                    if len(buf) >= cfg.warmup and total_steps % cfg.update_every == 0:
                        t0 = time.perf_counter()
                        batch = buf.sample(cfg.batch, buf_rng)
                        train_step(cfg.algo, pop, batch, cfg.gamma, cfg.tau,
                                   learners=learners)
                        train_time += time.perf_counter() - t0
                        episode_trained = True
                except NumericsError as exc:
                    raise RuntimeError(
                        f"numeric abort at episode {episode}, step {step}: {exc}"
                    ) from exc
            for agent_id in range(env.n_agents):
                rewards_writer.writerow(_row(
                    [episode, cfg.algo, cfg.scenario, cfg.seed, agent_id,
                     ep_return[agent_id]]
                ))
            if episode_trained:
                train_episodes += 1
            if scheds:
                for sched in scheds.values():
                    sched.advance(episode)
            if cfg.eval_every > 0 and episode % cfg.eval_every == 0:
                means = evaluate(pop, cfg.scenario, cfg.eval_episodes, eval_seed,
                                 steps=cfg.steps, env_overrides=cfg.env)
                art.eval_history.append((episode, means))
                for agent_id, m in enumerate(means):
                    eval_writer.writerow(_row(
                        [episode, cfg.algo, cfg.scenario, cfg.seed, agent_id, m]
                    ))
            if (probe_fh and episode % cfg.probe_every == 0 and episode >= cfg.k
                    and len(buf) >= cfg.warmup):
                learners = learner_map()
                waiting = [
                    i for _, ids in teams for i in ids
                    if len(ids) > 1 and i not in learners.values()
                ]
                if waiting:
                    batch = buf.sample(cfg.batch, probe_rng)
                    nf, nb = gradient_norm_probe(
                        pop, batch, waiting, learners, cfg.gamma,
                        steps=cfg.probe_steps,
                    )
                    art.probe_history.append((episode, nf, nb))
                    probe_writer.writerow(_row(
                        [episode, cfg.algo, cfg.scenario, cfg.seed, nf, nb]
                    ))
    finally:
        rewards_fh.close()
        eval_fh.close()
        if probe_fh:
            probe_fh.close()

    art.total_seconds = time.perf_counter() - started
    layout = ALGO_LAYOUT[cfg.algo]
    art.timing = [
        TimingReport("interaction", cfg.algo, cfg.scenario, layout,
                     interact_time / max(interact_steps, 1), interact_steps),
        TimingReport("training", cfg.algo, cfg.scenario, layout,
                     train_time / max(train_episodes, 1), train_episodes),
    ]
    write_timing_csv(art.timing_csv, art.timing)
    save_population(pop, art.checkpoint_dir, scenario=cfg.scenario, algo=cfg.algo,
                    extra={"episodes_trained": cfg.episodes, "seed": cfg.seed})
    return art


def evaluate(pop, scenario, episodes, seed, steps=25, env_overrides=None):
    """Noiseless rollouts; returns each agent's mean episode return."""
    merged = dict(scenario=scenario, episode_length=steps, seed=seed)
    merged.update(env_overrides or {})
    env = ParticleEnv(EnvConfig(**merged))
    rng = np.random.default_rng(seed)
    totals = np.zeros(env.n_agents)
    for _ in range(episodes):
        state, obs = env.reset(rng)
        done = False
        while not done:
            actions = pop.select_actions(obs, mode="exploit")
            state, rewards, obs, done = env.step(state, actions)
            totals += rewards
    return totals / episodes


def env_only_returns(scenario, episodes, seed, steps=25):
    """Rollout oracle with all-zero actions (stationary agents)."""
    env = ParticleEnv(EnvConfig(scenario=scenario, episode_length=steps, seed=seed))
    rng = np.random.default_rng(seed)
    zeros = np.zeros((env.n_agents, 2))
    totals = np.zeros(env.n_agents)
    for _ in range(episodes):
        state, obs = env.reset(rng)
        done = False
        while not done:
            state, rewards, obs, done = env.step(state, zeros)
            totals += rewards
    return totals / episodes


def bench_interaction(scenario, steps=10_000, seed=0, warmup=1000):
    """Time action computation per environment step under both layouts.

    The per-agent population gets the unified population's actor weights, so
    both layouts drive identical trajectories and only the computation style
    differs. Only the action selection is inside the timed region. If the
    measured window is too small for the clock, the step count is doubled
    until it is not.
    """
    reports = []
    for layout_algo, layout in (("iuur", "unified"), ("maddpg", "per_agent")):
        measured_steps = steps
        while True:
            env = ParticleEnv(EnvConfig(scenario=scenario, seed=seed))
            rng = np.random.default_rng(seed)
            shared = AgentPopulation.for_env(env, "iuur",
                                             rng=np.random.default_rng(seed + 1))
            if layout == "unified":
                pop = shared
            else:
                pop = AgentPopulation.for_env(env, "maddpg",
                                              rng=np.random.default_rng(seed + 1))
                for i in range(pop.n_agents):
                    pop.actors[i].set_params_from(shared.actor_for(i))
            state, obs = env.reset(rng)
            elapsed = 0.0
            for step in range(warmup + measured_steps):
                t0 = time.perf_counter()
                actions = pop.select_actions(obs, mode="exploit")
                t1 = time.perf_counter()
                if step >= warmup:
                    elapsed += t1 - t0
                state, _, obs, done = env.step(state, actions)
                if done:
                    state, obs = env.reset(rng)
            if elapsed > 1e-3:  # comfortably above clock resolution
                break
            measured_steps *= 2
        reports.append(TimingReport(
            "interaction", layout_algo, scenario, layout,
            elapsed / measured_steps, measured_steps,
        ))
    return reports


def bench_training(scenario, episodes, algos=("maddpg", "iuur"), seed=0,
                   out=None, rounds=1, **overrides):
    """Equal-episode training runs per algorithm; reports wall-clock cost.

    rounds > 1 interleaves the algorithms (a, b, a, b, ...) so slow machine
    drift hits them evenly; per-algorithm numbers are summed over rounds.
    Returns a list of (algo, training TimingReport, total loop seconds).
    """
    totals = {algo: 0.0 for algo in algos}
    train_time = {algo: 0.0 for algo in algos}
    train_episodes = {algo: 0 for algo in algos}
    for rnd in range(rounds):
        # alternate order each round so slow drift cancels pairwise
        order = list(algos) if rnd % 2 == 0 else list(reversed(algos))
        for algo in order:
            base = dict(
                scenario=scenario, algo=algo, episodes=episodes,
                seed=seed + rnd, k=max(1, min(5000, episodes)), batch=128,
                warmup=512, update_every=2, eval_every=0, probe_every=0,
            )
            base.update(overrides)
            with tempfile.TemporaryDirectory() as tmp:
                cfg = RunConfig(**{**base, "out": str(Path(tmp) / algo)})
                art = run_training(cfg)
                training = next(r for r in art.timing if r.phase == "training")
                totals[algo] += art.total_seconds
                train_time[algo] += training.mean_seconds * training.samples
                train_episodes[algo] += training.samples
    results = [
        (algo,
         TimingReport("training", algo, scenario, ALGO_LAYOUT[algo],
                      train_time[algo] / max(train_episodes[algo], 1),
                      train_episodes[algo]),
         totals[algo])
        for algo in algos
    ]
    if out:
        write_timing_csv(out, [r for _, r, _ in results])
    return results
