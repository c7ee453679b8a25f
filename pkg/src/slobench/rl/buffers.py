"""Experience storage for the off-policy and on-policy agents."""
from __future__ import annotations

import numpy as np

from slobench.errors import ContractViolation


class ReplayBuffer:
    """FIFO transition store with uniform sampling.

    Storage grows geometrically up to ``capacity`` rather than being allocated
    up front; observations are kept in float32.
    """

    def __init__(self, capacity: int, obs_dim: int, min_sample: int = 128):
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.min_sample = min_sample
        self.size = 0
        self.pos = 0
        self._alloc(min(capacity, 1024))

    def _alloc(self, n: int):
        old = getattr(self, "obs", None)
        obs = np.zeros((n, self.obs_dim), np.float32)
        next_obs = np.zeros((n, self.obs_dim), np.float32)
        actions = np.zeros(n, np.int64)
        rewards = np.zeros(n, np.float64)
        if old is not None:
            k = self.size
            obs[:k], next_obs[:k] = self.obs[:k], self.next_obs[:k]
            actions[:k], rewards[:k] = self.actions[:k], self.rewards[:k]
        self.obs, self.next_obs, self.actions, self.rewards = obs, next_obs, actions, rewards

    def __len__(self):
        return self.size

    def add(self, obs, action: int, reward: float, next_obs):
        if self.size == len(self.obs) and self.size < self.capacity:
            self._alloc(min(self.capacity, 2 * len(self.obs)))
        self.obs[self.pos] = obs
        self.next_obs[self.pos] = next_obs
        self.actions[self.pos] = action
        self.rewards[self.pos] = reward
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        if self.size < max(n, self.min_sample):
            raise ContractViolation(f"cannot sample {n} from a buffer of {self.size}")
        idx = rng.integers(0, self.size, size=n)
        return (self.obs[idx].astype(float), self.actions[idx], self.rewards[idx],
                self.next_obs[idx].astype(float))

    def state_arrays(self) -> dict:
        k = self.size
        return {"rb_obs": self.obs[:k], "rb_next_obs": self.next_obs[:k],
                "rb_actions": self.actions[:k], "rb_rewards": self.rewards[:k],
                "rb_meta": np.array([self.size, self.pos, self.capacity], np.int64)}

    def load_arrays(self, arrays: dict):
        size, pos, capacity = (int(x) for x in arrays["rb_meta"])
        self.capacity = capacity
        self.obs = None
        self.size = 0
        self._alloc(max(size, min(capacity, 1024)))
        self.obs[:size], self.next_obs[:size] = arrays["rb_obs"], arrays["rb_next_obs"]
        self.actions[:size], self.rewards[:size] = arrays["rb_actions"], arrays["rb_rewards"]
        self.size, self.pos = size, pos


class RolloutBuffer:
    """Ordered on-policy transitions; emptied after every update."""

    def __init__(self, horizon: int, obs_dim: int):
        self.horizon = horizon
        self.obs = np.zeros((horizon, obs_dim))
        self.actions = np.zeros(horizon, np.int64)
        self.rewards = np.zeros(horizon)
        self.last_obs = np.zeros(obs_dim)
        self.size = 0

    def __len__(self):
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.horizon

    def add(self, obs, action: int, reward: float, next_obs):
        if self.full:
            raise ContractViolation("rollout buffer is full")
        self.obs[self.size] = obs
        self.actions[self.size] = action
        self.rewards[self.size] = reward
        self.last_obs = np.asarray(next_obs, dtype=float)
        self.size += 1

    def clear(self):
        self.size = 0

    def state_arrays(self) -> dict:
        return {"ro_obs": self.obs[:self.size], "ro_actions": self.actions[:self.size],
                "ro_rewards": self.rewards[:self.size], "ro_last": self.last_obs}

    def load_arrays(self, arrays: dict):
        k = len(arrays["ro_actions"])
        self.obs[:k], self.actions[:k] = arrays["ro_obs"], arrays["ro_actions"]
        self.rewards[:k], self.last_obs = arrays["ro_rewards"], arrays["ro_last"].copy()
        self.size = k
