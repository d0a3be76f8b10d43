"""Deterministic 2-D particle worlds with continuous states and actions.

Four scenarios: cooperative navigation with 3 or 10 agents (spread3,
spread10) and predator-prey pursuit (pp3v1, pp6v2). Dynamics are a damped
double integrator per entity:

    v <- (1 - damping) * v + force_multiplier * action
    v <- v clipped to the entity's max speed
    p <- p + v

Critics consume the flat global state (positions and velocities of every
entity in fixed order); actors consume first-person observations in which
all other entities appear relative to the observer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

# entity kinds
AGENT, LANDMARK, OBSTACLE = 0, 1, 2
# agent roles
COOPERATOR, PREDATOR, PREY = 0, 1, 2

ROLE_NAMES = {COOPERATOR: "cooperators", PREDATOR: "predators", PREY: "preys"}

SCENARIOS = {
    # scenario id -> (cooperators, predators, preys, landmarks, obstacles)
    "spread3": (3, 0, 0, 3, 0),
    "spread10": (10, 0, 0, 10, 0),
    "pp3v1": (0, 3, 1, 0, 2),
    "pp6v2": (0, 6, 2, 0, 2),
}


@dataclass
class EnvConfig:
    """Scenario id plus every physics and reward constant, all overridable."""

    scenario: str = "spread3"
    episode_length: int = 25
    damping: float = 0.25
    force_mult: float = 0.05
    # radii per kind/role
    agent_radius: float = 0.15
    predator_radius: float = 0.075
    prey_radius: float = 0.05
    landmark_radius: float = 0.05
    obstacle_radius: float = 0.2
    # speed caps, world units per step
    coop_max_speed: float = 0.1
    predator_max_speed: float = 0.1
    prey_max_speed: float = 0.13
    # rewards
    collision_penalty: float = 1.0
    capture_reward: float = 10.0
    shaping_coef: float = 0.1
    bound_start: float = 0.9
    # initial placement half-widths
    agent_spawn: float = 1.0
    landmark_spawn: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(
                f"unknown scenario {self.scenario!r}; expected one of {sorted(SCENARIOS)}"
            )
        if self.episode_length <= 0:
            raise ValueError("episode_length must be positive")


@dataclass
class WorldState:
    """Snapshot of the simulator: dynamic arrays plus static entity layout."""

    pos: np.ndarray          # (E, 2)
    vel: np.ndarray          # (E, 2)
    kind: np.ndarray         # (E,) AGENT | LANDMARK | OBSTACLE
    role: np.ndarray         # (E,) role for agents, -1 otherwise
    radius: np.ndarray       # (E,)
    max_speed: np.ndarray    # (E,) zero for static entities
    t: int = 0

    @property
    def n_agents(self):
        return int(np.sum(self.kind == AGENT))


def collides(state, i, j):
    """Contact test: centre distance strictly below the radius sum."""
    gap = state.pos[i] - state.pos[j]
    return float(np.hypot(gap[0], gap[1])) < state.radius[i] + state.radius[j]


class ParticleEnv:
    """One scenario instance. Stateless apart from its config; the world
    state moves through reset/step explicitly, so copies are cheap and runs
    with different rngs never interfere."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        n_coop, n_pred, n_prey, n_lm, n_obs = SCENARIOS[cfg.scenario]
        self.n_agents = n_coop + n_pred + n_prey
        self.n_landmarks = n_lm
        self.n_obstacles = n_obs
        self.n_entities = self.n_agents + n_lm + n_obs
        self.mixed = n_pred > 0

        kind = np.array(
            [AGENT] * self.n_agents + [LANDMARK] * n_lm + [OBSTACLE] * n_obs,
            dtype=np.int64,
        )
        role = np.full(self.n_entities, -1, dtype=np.int64)
        role[:n_coop] = COOPERATOR
        role[n_coop:n_coop + n_pred] = PREDATOR
        role[n_coop + n_pred:self.n_agents] = PREY
        radius = np.empty(self.n_entities)
        max_speed = np.zeros(self.n_entities)
        for e in range(self.n_entities):
            if kind[e] == LANDMARK:
                radius[e] = cfg.landmark_radius
            elif kind[e] == OBSTACLE:
                radius[e] = cfg.obstacle_radius
            elif role[e] == COOPERATOR:
                radius[e], max_speed[e] = cfg.agent_radius, cfg.coop_max_speed
            elif role[e] == PREDATOR:
                radius[e], max_speed[e] = cfg.predator_radius, cfg.predator_max_speed
            else:
                radius[e], max_speed[e] = cfg.prey_radius, cfg.prey_max_speed
        self._kind = kind
        self._role = role
        self._radius = radius
        self._max_speed = max_speed
        # observation gather indices: for agent i, every other agent in order
        self._others = np.array(
            [[j for j in range(self.n_agents) if j != i] for i in range(self.n_agents)],
            dtype=np.int64,
        ).reshape(self.n_agents, self.n_agents - 1)

        per_agent = 4 + 2 * (n_lm + n_obs) + 2 * (self.n_agents - 1)
        if self.mixed:
            per_agent += 2 * (self.n_agents - 1) + 2
        self.obs_dim = per_agent
        self.state_dim = 4 * self.n_entities
        self.act_dim = 2

    def teams(self):
        """Agent ids grouped by role, in fixed role order."""
        out = []
        for r in (COOPERATOR, PREDATOR, PREY):
            ids = [i for i in range(self.n_agents) if self._role[i] == r]
            if ids:
                out.append((ROLE_NAMES[r], ids))
        return out

    def reset(self, rng):
        """Place agents, landmarks and obstacles uniformly; zero velocities."""
        cfg = self.cfg
        pos = np.zeros((self.n_entities, 2))
        a, lw = cfg.agent_spawn, cfg.landmark_spawn
        pos[:self.n_agents] = rng.uniform(-a, a, size=(self.n_agents, 2))
        rest = self.n_entities - self.n_agents
        if rest:
            pos[self.n_agents:] = rng.uniform(-lw, lw, size=(rest, 2))
        state = WorldState(
            pos=pos,
            vel=np.zeros((self.n_entities, 2)),
            kind=self._kind,
            role=self._role,
            radius=self._radius,
            max_speed=self._max_speed,
            t=0,
        )
        return state, self.observe(state)

    def step(self, state, actions):
        """Advance one tick: integrate, resolve obstacles, score, observe."""
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n_agents, 2):
            raise ValueError(
                f"expected actions of shape ({self.n_agents}, 2), got {actions.shape}"
            )
        cfg = self.cfg
        forces = np.clip(actions, -1.0, 1.0)
        vel = state.vel.copy()
        na = self.n_agents
        vel[:na] = (1.0 - cfg.damping) * vel[:na] + cfg.force_mult * forces
        speed = np.linalg.norm(vel[:na], axis=1)
        cap = self._max_speed[:na]
        over = speed > cap
        if np.any(over):
            vel[:na][over] *= (cap[over] / speed[over])[:, None]
        pos = state.pos + vel
        self._push_out_of_obstacles(pos)
        nxt = replace(state, pos=pos, vel=vel, t=state.t + 1)
        if self.mixed:
            rewards = self.predator_prey_rewards(nxt)
        else:
            rewards = self.spread_rewards(nxt)
        done = nxt.t >= cfg.episode_length
        return nxt, rewards, self.observe(nxt), done

    def _push_out_of_obstacles(self, pos):
        if not self.n_obstacles:
            return
        for o in range(self.n_agents + self.n_landmarks, self.n_entities):
            gap = pos[:self.n_agents] - pos[o]
            dist = np.linalg.norm(gap, axis=1)
            min_dist = self._radius[:self.n_agents] + self._radius[o]
            for i in np.nonzero(dist < min_dist)[0]:
                if dist[i] == 0.0:
                    gap[i] = np.array([1.0, 0.0])
                    dist[i] = 1.0
                pos[i] = pos[o] + gap[i] * (min_dist[i] / dist[i])

    def spread_rewards(self, state):
        """Shared coverage term plus individual collision penalties.

        Team term: -sum over landmarks of the closest agent's distance,
        identical for every agent. Each colliding pair costs both members
        one collision penalty.
        """
        na = self.n_agents
        apos = state.pos[:na]
        lpos = state.pos[na:na + self.n_landmarks]
        dists = np.linalg.norm(lpos[:, None, :] - apos[None, :, :], axis=2)
        team = -float(np.sum(np.min(dists, axis=1)))
        rewards = np.full(na, team)
        pair = np.linalg.norm(apos[:, None, :] - apos[None, :, :], axis=2)
        thresh = state.radius[:na][:, None] + state.radius[:na][None, :]
        hit = pair < thresh
        np.fill_diagonal(hit, False)
        rewards -= self.cfg.collision_penalty * hit.sum(axis=1)
        return rewards

    def predator_prey_rewards(self, state):
        """Pursuit scoring: capture bonuses, distance shaping, prey bounds."""
        cfg = self.cfg
        na = self.n_agents
        pred = np.nonzero(state.role[:na] == PREDATOR)[0]
        prey = np.nonzero(state.role[:na] == PREY)[0]
        rewards = np.zeros(na)
        gaps = np.linalg.norm(
            state.pos[pred][:, None, :] - state.pos[prey][None, :, :], axis=2
        )
        rewards[pred] -= cfg.shaping_coef * np.min(gaps, axis=1)
        rewards[prey] += cfg.shaping_coef * np.min(gaps, axis=0)
        touch = gaps < (state.radius[pred][:, None] + state.radius[prey][None, :])
        # every capture pays the whole predator team; the touched prey pays
        rewards[pred] += cfg.capture_reward * int(touch.sum())
        rewards[prey] -= cfg.capture_reward * touch.sum(axis=0)
        for q in prey:
            rewards[q] -= sum(
                _boundary_penalty(abs(c), cfg.bound_start) for c in state.pos[q]
            )
        return rewards

    def observe(self, state):
        """First-person observations, one row per agent, equal widths.

        Layout: own velocity, own position, landmark/obstacle offsets, other
        agents' offsets, then (mixed scenarios only) other agents' relative
        velocities and the observer's role one-hot.
        """
        na = self.n_agents
        apos, avel = state.pos[:na], state.vel[:na]
        blocks = [avel, apos]
        if self.n_entities > na:
            rel = state.pos[na:][None, :, :] - apos[:, None, :]
            blocks.append(rel.reshape(na, -1))
        if na > 1:
            rel = state.pos[self._others] - apos[:, None, :]
            blocks.append(rel.reshape(na, -1))
        if self.mixed:
            relv = state.vel[self._others] - avel[:, None, :]
            blocks.append(relv.reshape(na, -1))
            onehot = np.zeros((na, 2))
            onehot[state.role[:na] == PREDATOR, 0] = 1.0
            onehot[state.role[:na] == PREY, 1] = 1.0
            blocks.append(onehot)
        return np.concatenate(blocks, axis=1)

    def global_state(self, state):
        """Flat critic input: every entity's position then velocity, in order."""
        return np.concatenate([state.pos, state.vel], axis=1).reshape(-1)


def _boundary_penalty(x, start):
    """Escalating cost for a prey coordinate drifting out of the arena."""
    if x < start:
        return 0.0
    if x < 1.0:
        return (x - start) * 10.0
    return min(np.exp(2.0 * x - 2.0), 10.0)


def write_trajectory(path, states):
    """Dump a rollout as CSV rows: step, entity_id, x, y, vx, vy."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "entity_id", "x", "y", "vx", "vy"])
        for state in states:
            for e in range(state.pos.shape[0]):
                writer.writerow(
                    [state.t, e, *(repr(float(v)) for v in state.pos[e]),
                     *(repr(float(v)) for v in state.vel[e])]
                )


def make_env(scenario, **overrides):
    """Convenience constructor used by the harness and scripts."""
    return ParticleEnv(EnvConfig(scenario=scenario, **overrides))
