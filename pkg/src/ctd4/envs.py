"""Native continuous-control environments, deterministic and seeded.

Three tasks behind one interface: a pendulum swing-up and a cart-pole
swing-up for actual learning, and a constant-reward probe whose discounted
return is known in closed form (handy for critic-convergence checks).
Rewards are normalized to [0, 1] per step in every task, so episode returns
are directly comparable across tasks.

Angle convention: theta = 0 is upright, theta measured in radians.  Both
dynamic tasks use reward (1 + cos(theta)) / 2, i.e. 1 when balanced upright,
0 when hanging straight down.

Episode-end semantics follow the usual infinite-horizon treatment:
``terminated`` marks an environment-level failure (absorbing state, no
bootstrapping); ``truncated`` marks the time limit (bootstrapping continues).
Time limits never set ``terminated``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, slots=True)
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


class Env:
    """Base interface: fixed-size Box action space, seeded reset, step."""

    obs_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_steps: int

    def __init__(self) -> None:
        self._rng: np.random.Generator | None = None
        self._steps = 0
        self._needs_reset = True

    def reset(self, seed: int | np.random.Generator | None = None) -> np.ndarray:
        """Start a new episode; reseeds the env stream when a seed is given.

        With seed=None the existing stream continues (sequential episodes of
        one run stay on one stream).  The first reset must provide a seed.
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        elif self._rng is None:
            raise ValueError("first reset requires a seed")
        self._steps = 0
        self._needs_reset = False
        return self._reset_state(self._rng)

    def step(self, action: np.ndarray) -> StepResult:
        if self._needs_reset:
            raise RuntimeError("episode is over (or never started); call reset")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.action_dim,):
            raise ValueError(
                f"action shape {action.shape} != ({self.action_dim},)"
            )
        if not np.all(np.isfinite(action)):
            raise ValueError(f"non-finite action {action}")
        if np.any(action < self.action_low) or np.any(action > self.action_high):
            raise ValueError(
                f"action {action} outside [{self.action_low}, {self.action_high}]"
            )
        obs, reward, terminated = self._step_state(action)
        self._steps += 1
        truncated = not terminated and self._steps >= self.max_steps
        if terminated or truncated:
            self._needs_reset = True
        return StepResult(obs, reward, terminated, truncated)

    # subclasses implement the actual state machine
    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _step_state(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        raise NotImplementedError


def _wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    return np.pi - (np.pi - theta) % TWO_PI


class PendulumSwingup(Env):
    """Torque-limited rod pendulum; swing up and balance.

    State (theta, theta_dot); theta_ddot = (3g/2l) sin(theta) + (3/ml^2) u
    with g=10, m=1, l=1, integrated by semi-implicit Euler at dt=0.05 with
    theta_dot clipped to [-8, 8] and theta wrapped to (-pi, pi].  Torque
    u in [-2, 2] is too weak to lift the pendulum directly, so the policy
    has to pump energy.  Episodes are 200 steps, truncation only.
    """

    obs_dim = 3
    action_dim = 1
    max_steps = 200

    G = 10.0
    M = 1.0
    L = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0

    def __init__(self) -> None:
        super().__init__()
        self.action_low = np.array([-self.MAX_TORQUE])
        self.action_high = np.array([self.MAX_TORQUE])
        self._theta = 0.0
        self._theta_dot = 0.0

    def _obs(self) -> np.ndarray:
        return np.array(
            [np.cos(self._theta), np.sin(self._theta), self._theta_dot / self.MAX_SPEED]
        )

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        # theta ~ U(-pi, pi], theta_dot ~ U(-1, 1)
        self._theta = np.pi - rng.uniform(0.0, TWO_PI)
        self._theta_dot = rng.uniform(-1.0, 1.0)
        return self._obs()

    def _step_state(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        u = float(action[0])
        g, m, l, dt = self.G, self.M, self.L, self.DT
        theta_ddot = (3.0 * g / (2.0 * l)) * np.sin(self._theta) + (
            3.0 / (m * l * l)
        ) * u
        self._theta_dot = float(
            np.clip(self._theta_dot + theta_ddot * dt, -self.MAX_SPEED, self.MAX_SPEED)
        )
        self._theta = _wrap_angle(self._theta + self._theta_dot * dt)
        reward = (1.0 + np.cos(self._theta)) / 2.0
        return self._obs(), float(reward), False

    def energy(self) -> float:
        """Mechanical energy offset to be >= 0 (zero when hanging at rest).

        Rod about its end: I = m l^2 / 3, center of mass at l/2, so
        E = I theta_dot^2 / 2 + m g (l/2) (1 + cos(theta)).
        """
        kinetic = (self.M * self.L**2 / 3.0) * self._theta_dot**2 / 2.0
        potential = self.M * self.G * (self.L / 2.0) * (1.0 + np.cos(self._theta))
        return float(kinetic + potential)


class CartpoleSwingup(Env):
    """Cart-pole where the pole starts hanging down and must be swung up.

    Classic cart-pole equations (cart mass 1, pole mass 0.1, half-length 0.5,
    g=9.8), force = 10 * a for a in [-1, 1], semi-implicit Euler at dt=0.02.
    Reward (1 + cos(theta)) / 2; the episode fails (terminates) when the cart
    leaves |x| <= 2.4, otherwise truncates at 500 steps.

    Observation: (x / 2.4, x_dot / 5, cos(theta), sin(theta), theta_dot / 10).
    """

    obs_dim = 5
    action_dim = 1
    max_steps = 500

    G = 9.8
    M_CART = 1.0
    M_POLE = 0.1
    L = 0.5  # half-length
    FORCE_SCALE = 10.0
    DT = 0.02
    X_LIMIT = 2.4

    def __init__(self) -> None:
        super().__init__()
        self.action_low = np.array([-1.0])
        self.action_high = np.array([1.0])
        self._x = 0.0
        self._x_dot = 0.0
        self._theta = np.pi
        self._theta_dot = 0.0

    def _obs(self) -> np.ndarray:
        return np.array(
            [
                self._x / self.X_LIMIT,
                self._x_dot / 5.0,
                np.cos(self._theta),
                np.sin(self._theta),
                self._theta_dot / 10.0,
            ]
        )

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        self._x = 0.0
        self._x_dot = 0.0
        self._theta = np.pi + rng.uniform(-0.05, 0.05)
        self._theta_dot = 0.0
        return self._obs()

    def _step_state(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        force = self.FORCE_SCALE * float(action[0])
        mc, mp, l, g, dt = self.M_CART, self.M_POLE, self.L, self.G, self.DT
        total = mc + mp
        sin_t = np.sin(self._theta)
        cos_t = np.cos(self._theta)

        temp = (force + mp * l * self._theta_dot**2 * sin_t) / total
        theta_ddot = (g * sin_t - cos_t * temp) / (
            l * (4.0 / 3.0 - mp * cos_t**2 / total)
        )
        x_ddot = temp - mp * l * theta_ddot * cos_t / total

        self._x_dot += x_ddot * dt
        self._x += self._x_dot * dt
        self._theta_dot += theta_ddot * dt
        self._theta = _wrap_angle(self._theta + self._theta_dot * dt)

        terminated = abs(self._x) > self.X_LIMIT
        reward = (1.0 + np.cos(self._theta)) / 2.0
        return self._obs(), float(reward), bool(terminated)


class ConstProbe(Env):
    """Analytic probe: one state, reward 1 every step, 100-step truncation.

    The discounted return from any state with H steps remaining is the
    geometric sum (1 - gamma^H) / (1 - gamma), which makes this the ground
    truth for critic-convergence tests.
    """

    obs_dim = 1
    action_dim = 1
    max_steps = 100

    def __init__(self) -> None:
        super().__init__()
        self.action_low = np.array([-1.0])
        self.action_high = np.array([1.0])

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([0.0])

    def _step_state(self, action: np.ndarray) -> tuple[np.ndarray, float, bool]:
        return np.array([0.0]), 1.0, False


ENV_IDS = {
    "pendulum_swingup": PendulumSwingup,
    "cartpole_swingup": CartpoleSwingup,
    "const_probe": ConstProbe,
}


def make(env_id: str) -> Env:
    try:
        cls = ENV_IDS[env_id]
    except KeyError:
        raise ValueError(
            f"unknown env id {env_id!r}; known: {sorted(ENV_IDS)}"
        ) from None
    return cls()
