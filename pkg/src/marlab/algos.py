"""Trainers for MADDPG, iterative update (IU) and unified-representation
iterative update (IUUR).

All three share one mechanical core: deterministic actors trained by
ascending the critic's action gradient, critics trained on targets computed
from slowly-tracking target networks. They differ in network layout and in
who gets a Bellman target:

* maddpg: one actor/critic pair per agent, every agent trains every step,
  every critic target is the Bellman backup r + gamma * Q'.
* iu: per-agent networks, but only the scheduled learner of each team
  trains; everyone else is frozen outright.
* iuur: one shared actor and critic per team. The scheduled learner's
  critic target is the Bellman backup; waiting agents' targets are the raw
  target-critic output (no reward, no discount), which pins their value
  landscape and damps their share of the shared-policy gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nets import (
    AdamState,
    Mlp,
    NumericsError,
    adam_step,
    clip_gradients,
    grad_norm_sq,
    load_network,
    save_network,
    soft_update,
)

LAYOUTS = ("per_agent", "unified")
ALGO_LAYOUT = {"maddpg": "per_agent", "iu": "per_agent", "iuur": "unified"}


@dataclass
class LearnerSchedule:
    """Round-robin learner pointer for one team; l is 1-based within team."""

    team_size: int
    period: int
    l: int = 1

    def advance(self, episode):
        """Advance after finishing `episode`; fires exactly when episode % period == 0."""
        if episode % self.period == 0:
            self.l = (self.l % self.team_size) + 1
        return self.l


class AgentPopulation:
    """Networks for all agents under either layout, with uniform accessors.

    Per-agent layout allocates an actor/critic (plus targets) for every
    agent; unified layout allocates one shared set per team, so parameter
    count does not grow with team size. Critic inputs:

        per_agent: [global state | all actions]
        unified:   [global state | observer's observation | all actions]
    """

    def __init__(self, layout, teams, state_dim, obs_dim, act_dim=2,
                 hidden=(64, 64), actor_lr=1e-3, critic_lr=1e-3,
                 joint_action_dim=None, grad_clip=0.0, rng=None):
        if layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
        if rng is None:
            rng = np.random.default_rng()
        self.layout = layout
        self.teams = [(name, list(ids)) for name, ids in teams]
        ids = sorted(i for _, members in self.teams for i in members)
        if ids != list(range(len(ids))):
            raise ValueError(f"team members must partition 0..N-1, got {ids}")
        self.n_agents = len(ids)
        self.state_dim = state_dim
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.joint_action_dim = (
            act_dim * self.n_agents if joint_action_dim is None else joint_action_dim
        )
        self.hidden = tuple(hidden)
        self.grad_clip = float(grad_clip)
        self._team_of = {}
        for t, (_, members) in enumerate(self.teams):
            for i in members:
                self._team_of[i] = t

        if layout == "per_agent":
            critic_in = state_dim + self.joint_action_dim
            n_units = self.n_agents
        else:
            critic_in = state_dim + obs_dim + self.joint_action_dim
            n_units = len(self.teams)
        self.critic_in = critic_in

        self.actors, self.critics = [], []
        self.target_actors, self.target_critics = [], []
        self.adam_actors, self.adam_critics = [], []
        for _ in range(n_units):
            actor = Mlp(obs_dim, act_dim, hidden=hidden, out_act="tanh", rng=rng)
            critic = Mlp(critic_in, 1, hidden=hidden, out_act="identity", rng=rng)
            self.actors.append(actor)
            self.critics.append(critic)
            self.target_actors.append(actor.copy())
            self.target_critics.append(critic.copy())
            self.adam_actors.append(AdamState.for_net(actor, lr=actor_lr))
            self.adam_critics.append(AdamState.for_net(critic, lr=critic_lr))

    @classmethod
    def for_env(cls, env, algo, hidden=(64, 64), actor_lr=1e-3, critic_lr=1e-3,
                grad_clip=0.0, rng=None):
        if algo not in ALGO_LAYOUT:
            raise ValueError(f"unknown algorithm {algo!r}; expected {sorted(ALGO_LAYOUT)}")
        return cls(
            ALGO_LAYOUT[algo],
            env.teams(),
            state_dim=env.state_dim,
            obs_dim=env.obs_dim,
            act_dim=env.act_dim,
            hidden=hidden,
            actor_lr=actor_lr,
            critic_lr=critic_lr,
            grad_clip=grad_clip,
            rng=rng,
        )

    # uniform per-agent accessors; unified layout resolves through the team
    def _unit(self, agent_id):
        return agent_id if self.layout == "per_agent" else self._team_of[agent_id]

    def team_index(self, agent_id):
        return self._team_of[agent_id]

    def actor_for(self, i):
        return self.actors[self._unit(i)]

    def critic_for(self, i):
        return self.critics[self._unit(i)]

    def target_actor_for(self, i):
        return self.target_actors[self._unit(i)]

    def target_critic_for(self, i):
        return self.target_critics[self._unit(i)]

    def total_param_count(self):
        nets = (self.actors + self.critics + self.target_actors
                + self.target_critics)
        return sum(net.param_count() for net in nets)

    def select_actions(self, obs, mode="exploit", sigma=0.1, rng=None):
        """Actions for all agents; unified teams run one batched forward.

        explore mode adds zero-mean Gaussian noise of std sigma; both modes
        clip to [-1, 1].
        """
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.n_agents, self.obs_dim):
            raise ValueError(
                f"expected observations ({self.n_agents}, {self.obs_dim}), got {obs.shape}"
            )
        if mode not in ("explore", "exploit"):
            raise ValueError(f"mode must be explore or exploit, got {mode!r}")
        actions = np.empty((self.n_agents, self.act_dim))
        if self.layout == "unified":
            for t, (_, members) in enumerate(self.teams):
                actions[members] = self.actors[t].forward(obs[members])
        else:
            for i in range(self.n_agents):
                actions[i] = self.actors[i].forward(obs[i:i + 1])[0]
        if mode == "explore":
            if rng is None:
                raise ValueError("explore mode requires an rng")
            actions = actions + sigma * rng.standard_normal((self.n_agents, self.act_dim))
        return np.clip(actions, -1.0, 1.0)

    def target_next_actions(self, batch):
        """a'_j = target_actor(o'_j) for every agent, shape (B, N, act)."""
        B = batch.size
        out = np.empty((B, self.n_agents, self.act_dim))
        if self.layout == "unified":
            for t, (_, members) in enumerate(self.teams):
                stacked = batch.next_obs[:, members].transpose(1, 0, 2).reshape(
                    len(members) * B, self.obs_dim
                )
                acts = self.target_actors[t].forward(stacked)
                out[:, members] = acts.reshape(len(members), B, self.act_dim).transpose(1, 0, 2)
        else:
            for i in range(self.n_agents):
                out[:, i] = self.target_actors[i].forward(batch.next_obs[:, i])
        return out

    # --- critic input row builders -------------------------------------
    def _rows_per_agent(self, state, flat_actions):
        return np.concatenate([state, flat_actions], axis=1)

    def _rows_unified(self, state, obs_block, flat_actions, members):
        n, B = len(members), state.shape[0]
        S, O = self.state_dim, self.obs_dim
        rows = np.empty((n * B, self.critic_in))
        r3 = rows.reshape(n, B, self.critic_in)
        r3[:, :, :S] = state
        r3[:, :, S:S + O] = obs_block.transpose(1, 0, 2)
        r3[:, :, S + O:] = flat_actions
        return rows

    def snapshot_critics(self):
        return [
            ([p.copy() for p in c.parameters()], a.snapshot())
            for c, a in zip(self.critics, self.adam_critics)
        ]

    def restore_critics(self, snap):
        for (params, adam_snap), critic, adam in zip(snap, self.critics, self.adam_critics):
            for p, s in zip(critic.parameters(), params):
                p[...] = s
            adam.restore(adam_snap)


def target_q_values(pop, batch, agents, next_actions=None):
    """Target-critic evaluations Q'(next state, ..., target next actions).

    Returns one column per requested agent. This is the raw value-fixing
    target; the Bellman wrapper adds the reward and discount on top.
    """
    if next_actions is None:
        next_actions = pop.target_next_actions(batch)
    B = batch.size
    flat = next_actions.reshape(B, -1)
    out = np.empty((B, len(agents)))
    if pop.layout == "per_agent":
        rows = pop._rows_per_agent(batch.next_state, flat)
        for k, i in enumerate(agents):
            out[:, k] = pop.target_critic_for(i).forward(rows)[:, 0]
    else:
        for t, (_, members) in enumerate(pop.teams):
            wanted = [(k, i) for k, i in enumerate(agents) if pop.team_index(i) == t]
            if not wanted:
                continue
            ids = [i for _, i in wanted]
            rows = pop._rows_unified(batch.next_state, batch.next_obs[:, ids], flat, ids)
            q = pop.target_critics[t].forward(rows)[:, 0].reshape(len(ids), B)
            for (k, _), col in zip(wanted, q):
                out[:, k] = col
    if not np.all(np.isfinite(out)):
        raise NumericsError("target critic produced non-finite values")
    return out


def compute_targets_bellman(pop, batch, agents, gamma, next_actions=None):
    """y_i = r_i + gamma * Q'(s', o'_i, a'_1..a'_N), one column per agent."""
    q = target_q_values(pop, batch, agents, next_actions)
    return batch.rewards[:, agents] + gamma * q


def compute_targets_fixed(pop, batch, agents, next_actions=None):
    """Waiting-agent targets: the target critic's own output, nothing else."""
    return target_q_values(pop, batch, agents, next_actions)


def training_targets(algo, pop, batch, gamma, learners=None):
    """Assemble the (B, N) target matrix and the agents whose critics train.

    learners maps team index -> learner agent id (iu and iuur only).
    """
    all_agents = list(range(pop.n_agents))
    if algo == "maddpg":
        return compute_targets_bellman(pop, batch, all_agents, gamma), all_agents
    if algo == "iu":
        ids = sorted(learners.values())
        targets = np.zeros((batch.size, pop.n_agents))
        targets[:, ids] = compute_targets_bellman(pop, batch, ids, gamma)
        return targets, ids
    if algo == "iuur":
        next_actions = pop.target_next_actions(batch)
        learner_ids = sorted(learners.values())
        waiting_ids = [i for i in all_agents if i not in set(learner_ids)]
        targets = np.empty((batch.size, pop.n_agents))
        if waiting_ids:
            targets[:, waiting_ids] = compute_targets_fixed(
                pop, batch, waiting_ids, next_actions
            )
        targets[:, learner_ids] = compute_targets_bellman(
            pop, batch, learner_ids, gamma, next_actions
        )
        return targets, all_agents
    raise ValueError(f"unknown algorithm {algo!r}")


def update_critic(pop, batch, targets, agents=None):
    """One optimizer step on each trained critic against fixed targets.

    targets must be precomputed (no gradient flows through them; the arrays
    are never written). Returns the pre-step mean squared error over every
    (agent, sample) pair that trained.
    """
    if agents is None:
        agents = list(range(pop.n_agents))
    B = batch.size
    flat = batch.actions.reshape(B, -1)
    total_se = 0.0
    if pop.layout == "per_agent":
        rows = pop._rows_per_agent(batch.state, flat)
        for i in agents:
            critic = pop.critics[i]
            err = critic.forward(rows)[:, 0] - targets[:, i]
            total_se += float(np.sum(err * err))
            grads, _ = critic.backward((2.0 / B) * err[:, None],
                                        need_input_grads=False)
            if pop.grad_clip:
                grads = clip_gradients(grads, pop.grad_clip)
            adam_step(critic, pop.adam_critics[i], grads)
    else:
        for t, (_, members) in enumerate(pop.teams):
            ids = [i for i in members if i in set(agents)]
            if not ids:
                continue
            n = len(ids)
            rows = pop._rows_unified(batch.state, batch.obs[:, ids], flat, ids)
            y = targets[:, ids].transpose(1, 0).reshape(n * B)
            critic = pop.critics[t]
            err = critic.forward(rows)[:, 0] - y
            total_se += float(np.sum(err * err))
            grads, _ = critic.backward((2.0 / (n * B)) * err[:, None],
                                        need_input_grads=False)
            if pop.grad_clip:
                grads = clip_gradients(grads, pop.grad_clip)
            adam_step(critic, pop.adam_critics[t], grads)
    loss = total_se / (len(agents) * B)
    if not np.isfinite(loss):
        raise NumericsError(f"critic loss went non-finite: {loss}")
    return loss


def _unified_actor_grads(pop, team_idx, batch, ids):
    """Policy-ascent gradient of the shared actor over the given agents' rows.

    Averages (1 / (len(ids) * B)) sum_i sum_j grad_theta mu(o_i) dQ/da_i with
    every other agent's action taken from the batch. Returns the gradient
    list for maximization (not yet negated for Adam).
    """
    B = batch.size
    n = len(ids)
    actor = pop.actors[team_idx]
    critic = pop.critics[team_idx]
    stacked_obs = batch.obs[:, ids].transpose(1, 0, 2).reshape(n * B, pop.obs_dim)
    a = actor.forward(stacked_obs)
    base = pop.state_dim + pop.obs_dim
    rows = pop._rows_unified(batch.state, batch.obs[:, ids],
                             batch.actions.reshape(B, -1), ids)
    for k, i in enumerate(ids):
        rows[k * B:(k + 1) * B, base + pop.act_dim * i:base + pop.act_dim * (i + 1)] = \
            a[k * B:(k + 1) * B]
    critic.forward(rows)
    _, d_rows = critic.backward(np.full((n * B, 1), 1.0 / (n * B)))
    d_a = np.empty((n * B, pop.act_dim))
    for k, i in enumerate(ids):
        d_a[k * B:(k + 1) * B] = d_rows[
            k * B:(k + 1) * B, base + pop.act_dim * i:base + pop.act_dim * (i + 1)
        ]
    grads, _ = actor.backward(d_a)
    return [g.copy() for g in grads]


def _per_agent_actor_grads(pop, agent_id, batch):
    """Ascent gradient for one agent's own actor under its own critic."""
    B = batch.size
    actor = pop.actors[agent_id]
    critic = pop.critics[agent_id]
    a = actor.forward(batch.obs[:, agent_id])
    flat = batch.actions.reshape(B, -1).copy()
    flat[:, pop.act_dim * agent_id:pop.act_dim * (agent_id + 1)] = a
    rows = pop._rows_per_agent(batch.state, flat)
    critic.forward(rows)
    _, d_rows = critic.backward(np.full((B, 1), 1.0 / B))
    d_a = d_rows[
        :, pop.state_dim + pop.act_dim * agent_id:
        pop.state_dim + pop.act_dim * (agent_id + 1)
    ]
    grads, _ = actor.backward(d_a)
    return [g.copy() for g in grads]


def update_actor(pop, batch, agents=None):
    """Deterministic policy-gradient ascent step; returns the squared norm
    of the applied gradient (summed over trained networks)."""
    if agents is None:
        agents = list(range(pop.n_agents))
    norm = 0.0
    if pop.layout == "per_agent":
        for i in agents:
            grads = _per_agent_actor_grads(pop, i, batch)
            if not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericsError("actor gradient went non-finite")
            norm += grad_norm_sq(grads)
            if pop.grad_clip:
                grads = clip_gradients(grads, pop.grad_clip)
            adam_step(pop.actors[i], pop.adam_actors[i], [-g for g in grads])
    else:
        chosen = set(agents)
        for t, (_, members) in enumerate(pop.teams):
            ids = [i for i in members if i in chosen]
            if not ids:
                continue
            grads = _unified_actor_grads(pop, t, batch, ids)
            if not all(np.all(np.isfinite(g)) for g in grads):
                raise NumericsError("actor gradient went non-finite")
            norm += grad_norm_sq(grads)
            if pop.grad_clip:
                grads = clip_gradients(grads, pop.grad_clip)
            adam_step(pop.actors[t], pop.adam_actors[t], [-g for g in grads])
    return norm


def soft_update_targets(pop, tau, agents=None):
    """Track both target networks toward their online counterparts."""
    if pop.layout == "per_agent":
        if agents is None:
            agents = list(range(pop.n_agents))
        units = sorted({pop._unit(i) for i in agents})
    else:
        units = range(len(pop.teams))
    for u in units:
        soft_update(pop.target_actors[u], pop.actors[u], tau)
        soft_update(pop.target_critics[u], pop.critics[u], tau)


def train_step(algo, pop, batch, gamma, tau, learners=None):
    """One full update: targets, critic step, actor step, target tracking.

    Returns (critic loss, actor gradient norm squared). learners maps team
    index -> learner agent id and is required for iu and iuur.
    """
    if algo in ("iu", "iuur") and not learners:
        raise ValueError(f"{algo} requires a learner map")
    targets, critic_agents = training_targets(algo, pop, batch, gamma, learners)
    loss = update_critic(pop, batch, targets, agents=critic_agents)
    if algo == "maddpg":
        actor_agents = list(range(pop.n_agents))
        target_agents = None
    elif algo == "iu":
        actor_agents = sorted(learners.values())
        target_agents = actor_agents
    else:
        actor_agents = list(range(pop.n_agents))
        target_agents = None
    norm = update_actor(pop, batch, agents=actor_agents)
    soft_update_targets(pop, tau, agents=target_agents)
    return loss, norm


def gradient_norm_probe(pop, batch, waiting, learners, gamma, steps=10):
    """Measure the waiting agents' policy-gradient norm under both target
    rules, from identical starting parameters and the same batch.

    Route one trains the critic with value-fixing targets (learner Bellman,
    waiters raw target-critic output); route two trains it with Bellman
    targets for everyone. After `steps` critic updates each, the squared L2
    norm of the shared actor's gradient restricted to waiting agents' rows
    is recorded. Pure measurement: critics and optimizer state are restored.
    """
    if pop.layout != "unified":
        raise ValueError("gradient_norm_probe requires the unified layout")
    waiting = list(waiting)
    snap = pop.snapshot_critics()

    def waiting_norm():
        total = 0.0
        chosen = set(waiting)
        for t, (_, members) in enumerate(pop.teams):
            ids = [i for i in members if i in chosen]
            if ids:
                total += grad_norm_sq(_unified_actor_grads(pop, t, batch, ids))
        return total

    fixed_targets, agents = training_targets("iuur", pop, batch, gamma, learners)
    for _ in range(steps):
        update_critic(pop, batch, fixed_targets, agents=agents)
    norm_fixed = waiting_norm()
    pop.restore_critics(snap)

    bellman_targets = compute_targets_bellman(
        pop, batch, list(range(pop.n_agents)), gamma
    )
    for _ in range(steps):
        update_critic(pop, batch, bellman_targets, agents=agents)
    norm_bellman = waiting_norm()
    pop.restore_critics(snap)
    return norm_fixed, norm_bellman


# --- population checkpointing -------------------------------------------

MANIFEST_NAME = "manifest.json"


def save_population(pop, directory, scenario, algo, extra=None):
    """Write every network plus a manifest describing layout and teams."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    groups = {
        "actor": pop.actors,
        "critic": pop.critics,
        "target_actor": pop.target_actors,
        "target_critic": pop.target_critics,
    }
    for group, nets in groups.items():
        for u, net in enumerate(nets):
            name = f"{group}_{u}.net"
            save_network(net, directory / name)
            files[f"{group}_{u}"] = name
    manifest = {
        "format": "marlab-population-1",
        "layout": pop.layout,
        "scenario": scenario,
        "algo": algo,
        "teams": [[name, ids] for name, ids in pop.teams],
        "state_dim": pop.state_dim,
        "obs_dim": pop.obs_dim,
        "act_dim": pop.act_dim,
        "hidden": list(pop.hidden),
        "files": files,
    }
    if extra:
        manifest.update(extra)
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))


def load_population(directory):
    """Rebuild a population (and its manifest) from save_population output."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text())
    if manifest.get("format") != "marlab-population-1":
        raise ValueError(f"{directory}: unrecognized population checkpoint")
    pop = AgentPopulation(
        manifest["layout"],
        [(name, ids) for name, ids in manifest["teams"]],
        state_dim=manifest["state_dim"],
        obs_dim=manifest["obs_dim"],
        act_dim=manifest["act_dim"],
        hidden=tuple(manifest["hidden"]),
        rng=np.random.default_rng(0),
    )
    groups = {
        "actor": pop.actors,
        "critic": pop.critics,
        "target_actor": pop.target_actors,
        "target_critic": pop.target_critics,
    }
    for group, nets in groups.items():
        for u in range(len(nets)):
            loaded = load_network(directory / manifest["files"][f"{group}_{u}"])
            nets[u].set_params_from(loaded)
    return pop, manifest
