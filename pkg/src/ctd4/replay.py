"""Fixed-capacity uniform experience replay (ring buffer).

Stores transitions in preallocated struct-of-arrays storage so the training
loop can sample whole batches without touching Python objects per sample.
Sampling is uniform with replacement and never mutates the buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CAPACITY = 100_000


@dataclass(frozen=True, slots=True)
class Transition:
    state: np.ndarray
    action: np.ndarray  # normalized to [-1, 1] per dimension
    reward: float
    next_state: np.ndarray
    terminated: bool


@dataclass(frozen=True, slots=True)
class TransitionBatch:
    """Column view of a sampled minibatch; rows correspond across arrays."""

    states: np.ndarray       # (m, obs_dim)
    actions: np.ndarray      # (m, action_dim)
    rewards: np.ndarray      # (m,)
    next_states: np.ndarray  # (m, obs_dim)
    terminated: np.ndarray   # (m,) bool

    def __len__(self) -> int:
        return self.states.shape[0]


class ReplayBuffer:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._size = 0
        self._head = 0  # next write position
        self._states: np.ndarray | None = None
        self._actions: np.ndarray | None = None
        self._rewards: np.ndarray | None = None
        self._next_states: np.ndarray | None = None
        self._terminated: np.ndarray | None = None

    def __len__(self) -> int:
        return self._size

    def _allocate(self, obs_dim: int, action_dim: int) -> None:
        self._states = np.empty((self.capacity, obs_dim))
        self._actions = np.empty((self.capacity, action_dim))
        self._rewards = np.empty(self.capacity)
        self._next_states = np.empty((self.capacity, obs_dim))
        self._terminated = np.empty(self.capacity, dtype=bool)

    def push(self, t: Transition) -> None:
        state = np.asarray(t.state, dtype=np.float64)
        action = np.asarray(t.action, dtype=np.float64)
        next_state = np.asarray(t.next_state, dtype=np.float64)
        if self._states is None:
            if state.ndim != 1 or action.ndim != 1:
                raise ValueError("state and action must be 1-D vectors")
            self._allocate(state.shape[0], action.shape[0])
        if state.shape != (self._states.shape[1],):
            raise ValueError(f"state shape {state.shape} mismatches buffer")
        if action.shape != (self._actions.shape[1],):
            raise ValueError(f"action shape {action.shape} mismatches buffer")
        if next_state.shape != state.shape:
            raise ValueError("next_state shape mismatches state")
        if not (
            np.all(np.isfinite(state))
            and np.all(np.isfinite(action))
            and np.isfinite(t.reward)
            and np.all(np.isfinite(next_state))
        ):
            raise ValueError("non-finite transition rejected")

        i = self._head
        self._states[i] = state
        self._actions[i] = action
        self._rewards[i] = t.reward
        self._next_states[i] = next_state
        self._terminated[i] = bool(t.terminated)
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample_arrays(self, m: int, rng: np.random.Generator) -> TransitionBatch:
        """m uniform draws with replacement, as batch arrays (copies)."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if m < 1:
            raise ValueError("sample size must be positive")
        idx = rng.integers(0, self._size, size=m)
        # map logical index (0 = oldest) to physical ring slot
        if self._size == self.capacity:
            idx = (self._head + idx) % self.capacity
        return TransitionBatch(
            states=self._states[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_states=self._next_states[idx],
            terminated=self._terminated[idx],
        )

    def sample(self, m: int, rng: np.random.Generator) -> list[Transition]:
        batch = self.sample_arrays(m, rng)
        return [
            Transition(
                state=batch.states[j],
                action=batch.actions[j],
                reward=float(batch.rewards[j]),
                next_state=batch.next_states[j],
                terminated=bool(batch.terminated[j]),
            )
            for j in range(m)
        ]

    def snapshot(self) -> list[Transition]:
        """Contents oldest-to-newest (at most `capacity` most recent pushes)."""
        if self._size == 0:
            return []
        start = self._head if self._size == self.capacity else 0
        order = (start + np.arange(self._size)) % self.capacity
        return [
            Transition(
                state=self._states[j].copy(),
                action=self._actions[j].copy(),
                reward=float(self._rewards[j]),
                next_state=self._next_states[j].copy(),
                terminated=bool(self._terminated[j]),
            )
            for j in order
        ]
