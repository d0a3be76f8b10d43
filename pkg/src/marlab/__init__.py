"""marlab: a small multi-agent RL laboratory.

Implements MADDPG, iterative update (IU) and iterative update with a
unified per-team representation (IUUR) on deterministic 2-D particle
worlds, with benchmarks for batched action computation and a probe for the
waiting-agents' policy-gradient norm.
"""

from .algos import (
    AgentPopulation,
    LearnerSchedule,
    compute_targets_bellman,
    compute_targets_fixed,
    gradient_norm_probe,
    load_population,
    save_population,
    train_step,
    update_actor,
    update_critic,
)
from .envs import EnvConfig, ParticleEnv, WorldState, make_env
from .harness import (
    RunConfig,
    TimingReport,
    bench_interaction,
    bench_training,
    desk_profile,
    evaluate,
    run_training,
)
from .nets import AdamState, Mlp, adam_step, grad_norm_sq, soft_update
from .replay import Batch, ReplayBuffer, Transition

__all__ = [
    "AdamState",
    "AgentPopulation",
    "Batch",
    "EnvConfig",
    "LearnerSchedule",
    "Mlp",
    "ParticleEnv",
    "ReplayBuffer",
    "RunConfig",
    "TimingReport",
    "Transition",
    "WorldState",
    "adam_step",
    "bench_interaction",
    "bench_training",
    "compute_targets_bellman",
    "compute_targets_fixed",
    "desk_profile",
    "evaluate",
    "grad_norm_sq",
    "gradient_norm_probe",
    "load_population",
    "make_env",
    "run_training",
    "save_population",
    "soft_update",
    "train_step",
    "update_actor",
    "update_critic",
]

__version__ = "0.1.0"
