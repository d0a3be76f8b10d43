"""Bounded FIFO store for joint transitions with uniform batch sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    """One joint step: global state, per-agent views, actions and rewards."""

    state: np.ndarray        # (S,)
    obs: np.ndarray          # (N, O)
    actions: np.ndarray      # (N, 2)
    rewards: np.ndarray      # (N,)
    next_state: np.ndarray   # (S,)
    next_obs: np.ndarray     # (N, O)


@dataclass
class Batch:
    """Column-stacked sample of B transitions."""

    state: np.ndarray        # (B, S)
    obs: np.ndarray          # (B, N, O)
    actions: np.ndarray      # (B, N, 2)
    rewards: np.ndarray      # (B, N)
    next_state: np.ndarray   # (B, S)
    next_obs: np.ndarray     # (B, N, O)

    @property
    def size(self):
        return self.state.shape[0]


class ReplayBuffer:
    """Preallocated ring buffer; once full, the oldest entry is overwritten."""

    def __init__(self, capacity, state_dim, n_agents, obs_dim, act_dim=2):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._state = np.zeros((capacity, state_dim))
        self._obs = np.zeros((capacity, n_agents, obs_dim))
        self._act = np.zeros((capacity, n_agents, act_dim))
        self._rew = np.zeros((capacity, n_agents))
        self._next_state = np.zeros((capacity, state_dim))
        self._next_obs = np.zeros((capacity, n_agents, obs_dim))
        self._ptr = 0
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def store(self, tr: Transition):
        shapes = {
            "state": (tr.state, (self.state_dim,)),
            "obs": (tr.obs, (self.n_agents, self.obs_dim)),
            "actions": (tr.actions, (self.n_agents, self.act_dim)),
            "rewards": (tr.rewards, (self.n_agents,)),
            "next_state": (tr.next_state, (self.state_dim,)),
            "next_obs": (tr.next_obs, (self.n_agents, self.obs_dim)),
        }
        for name, (arr, want) in shapes.items():
            if np.shape(arr) != want:
                raise ValueError(
                    f"transition field {name!r} has shape {np.shape(arr)}, expected {want}"
                )
        if not np.all(np.isfinite(tr.rewards)):
            raise ValueError("transition rewards must be finite")
        i = self._ptr
        self._state[i] = tr.state
        self._obs[i] = tr.obs
        self._act[i] = tr.actions
        self._rew[i] = tr.rewards
        self._next_state[i] = tr.next_state
        self._next_obs[i] = tr.next_obs
        self._ptr = (i + 1) % self.capacity
        self.inserted += 1

    def sample(self, batch_size, rng):
        """Uniform-with-replacement draw of batch_size stored transitions.

        Replacement means batch_size may exceed the current size; only an
        empty buffer cannot be sampled.
        """
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, n, size=batch_size)
        return Batch(
            state=self._state[idx],
            obs=self._obs[idx],
            actions=self._act[idx],
            rewards=self._rew[idx],
            next_state=self._next_state[idx],
            next_obs=self._next_obs[idx],
        )

    def contents(self):
        """Stored transitions oldest-first (test and debugging aid)."""
        n = len(self)
        if self.inserted <= self.capacity:
            order = np.arange(n)
        else:
            order = (np.arange(n) + self._ptr) % self.capacity
        return [
            Transition(
                state=self._state[i].copy(),
                obs=self._obs[i].copy(),
                actions=self._act[i].copy(),
                rewards=self._rew[i].copy(),
                next_state=self._next_state[i].copy(),
                next_obs=self._next_obs[i].copy(),
            )
            for i in order
        ]
