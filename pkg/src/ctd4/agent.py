"""Distributional TD3 with an ensemble of Gaussian critics.

The moving parts:

  * a deterministic tanh actor pi(s) in [-1, 1]^action_dim, plus a target copy;
  * N critics, each mapping (s, a) to a Gaussian return estimate N(mu, sigma),
    plus target copies;
  * targets built per sample from the *fused* target-critic Gaussian:
    non-terminal  ->  N(R + gamma * mu_k, gamma * sigma_k)
    terminal      ->  N(R, sigma_terminal)
    where (mu_k, sigma_k) comes from fusing the target critics at
    (s', clip(pi'(s') + clipped noise)) with the configured strategy;
  * critic loss: mean over the batch of the summed KL divergences from each
    critic's prediction to the shared target (targets held constant);
  * actor loss: minus the fused mean of the live critics at (s, pi(s)); the
    gradient flows through the fusion fold (gains differentiated, not frozen)
    and through each critic's input gradient into the actor;
  * actor and target updates every `policy_delay`-th train step, Polyak rate
    tau; critics update every step;
  * Gaussian exploration noise and target-smoothing noise, both decaying by
    the same multiplicative schedule max(noise_min, init * decay^t), where t
    counts exploration actions (resp. target computations) so far.

The first `warmup_steps` exploration actions are uniform in [-1, 1] to fill
the replay buffer with diverse data before the actor has learned anything.

Everything is deterministic given the generators passed in: two agents built
and driven with identically seeded streams produce bit-identical parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from . import gauss, nn
from .gauss import FusionStrategy, Gaussian1D
from .replay import ReplayBuffer, TransitionBatch

CHECKPOINT_MAGIC = b"CTD4"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIQ")   # magic, version, network count
_CKPT_OPT_T = struct.Struct("<Q")       # per-network Adam step counter
_CKPT_TRAILER = struct.Struct("<QQQdd")  # counters and current noise stds


@dataclass(frozen=True, slots=True)
class AgentConfig:
    """Every knob of the algorithm, with TD3-lineage defaults.

    Values the source material fixes: gamma-discounted Gaussian targets,
    ensemble of num_critics=3 fused by the Kalman rule, one gradient update
    per environment step, delayed actor updates.  Learning rates, batch size,
    tau, delay and noise clip are customary defaults, not prescribed values.
    """

    gamma: float = 0.99
    tau: float = 0.005
    num_critics: int = 3
    batch_size: int = 256
    policy_delay: int = 2
    fusion: FusionStrategy = FusionStrategy.KALMAN
    fusion_variance: str = "paper"
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    explore_noise_init: float = 0.1
    explore_noise_min: float = 0.01
    noise_decay: float = 0.9999
    target_noise_init: float = 0.2
    target_noise_clip: float = 0.5
    warmup_steps: int = 1000
    sigma_terminal: float = 1e-2
    hidden_sizes: tuple[int, ...] = (256, 256)

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.num_critics < 1:
            raise ValueError("num_critics must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if not isinstance(self.fusion, FusionStrategy):
            raise ValueError(f"fusion must be a FusionStrategy, got {self.fusion!r}")
        if self.fusion_variance not in gauss.VARIANCE_MODES:
            raise ValueError(
                f"fusion_variance must be one of {gauss.VARIANCE_MODES}"
            )
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.explore_noise_init < 0 or self.explore_noise_min < 0:
            raise ValueError("noise stds must be non-negative")
        if not 0.0 < self.noise_decay <= 1.0:
            raise ValueError("noise_decay must be in (0, 1]")
        if self.target_noise_init < 0 or self.target_noise_clip < 0:
            raise ValueError("target noise parameters must be non-negative")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.sigma_terminal <= 0:
            raise ValueError("sigma_terminal must be positive")
        if any(w < 1 for w in self.hidden_sizes):
            raise ValueError(f"zero-width hidden layer in {self.hidden_sizes}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["fusion"] = self.fusion.value
        d["hidden_sizes"] = list(self.hidden_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AgentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "fusion" in kwargs and not isinstance(kwargs["fusion"], FusionStrategy):
            kwargs["fusion"] = FusionStrategy.from_string(kwargs["fusion"])
        if "hidden_sizes" in kwargs:
            kwargs["hidden_sizes"] = tuple(kwargs["hidden_sizes"])
        return cls(**kwargs)


def _decayed(init: float, minimum: float, decay: float, count: int) -> float:
    """Noise std after `count` decays, from the closed form (no drift)."""
    return max(minimum, init * decay**count)


class Ctd4Agent:
    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        config: AgentConfig,
        init_rng: np.random.Generator,
    ) -> None:
        if obs_dim < 1 or action_dim < 1:
            raise ValueError("obs_dim and action_dim must be positive")
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.config = config

        self.actor_spec = nn.actor_spec(obs_dim, action_dim, config.hidden_sizes)
        self.critic_spec = nn.critic_spec(obs_dim, action_dim, config.hidden_sizes)

        self.actor = nn.init_mlp(self.actor_spec, init_rng)
        self.critics = [
            nn.init_mlp(self.critic_spec, init_rng)
            for _ in range(config.num_critics)
        ]
        self.actor_target = self.actor.copy()
        self.critic_targets = [c.copy() for c in self.critics]

        self.actor_opt = nn.AdamState.zeros(self.actor_spec)
        self.critic_opts = [
            nn.AdamState.zeros(self.critic_spec) for _ in range(config.num_critics)
        ]

        self.train_step_count = 0    # train_step calls so far
        self.action_count = 0        # exploration actions drawn so far
        self.target_decay_count = 0  # target computations so far

    # --- noise schedules ---------------------------------------------------

    @property
    def explore_noise_std(self) -> float:
        c = self.config
        return _decayed(
            c.explore_noise_init, c.explore_noise_min, c.noise_decay,
            self.action_count,
        )

    @property
    def target_noise_std(self) -> float:
        c = self.config
        return _decayed(
            c.target_noise_init, c.explore_noise_min, c.noise_decay,
            self.target_decay_count,
        )

    # --- acting ------------------------------------------------------------

    def select_action(
        self,
        state: np.ndarray,
        explore: bool,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Policy action in [-1, 1]^action_dim.

        explore=False is the pure deterministic policy: no randomness, no
        counters touched (evaluation cannot perturb training).  explore=True
        adds Gaussian noise at the current decayed std -- or, during warmup,
        ignores the actor entirely and acts uniformly at random -- and then
        advances the decay counter.
        """
        state = np.asarray(state, dtype=np.float64)
        if state.shape != (self.obs_dim,):
            raise ValueError(f"state shape {state.shape} != ({self.obs_dim},)")
        if not np.all(np.isfinite(state)):
            raise ValueError(f"non-finite state {state}")

        if not explore:
            out, _ = nn.forward(self.actor, state)
            return out["action"]

        if rng is None:
            raise ValueError("explore=True requires an rng")
        warmup = self.action_count < self.config.warmup_steps
        std = self.explore_noise_std
        self.action_count += 1
        if warmup:
            return rng.uniform(-1.0, 1.0, size=self.action_dim)
        out, _ = nn.forward(self.actor, state)
        noisy = out["action"] + rng.normal(0.0, std, size=self.action_dim)
        return np.clip(noisy, -1.0, 1.0)

    # --- targets -----------------------------------------------------------

    def _target_arrays(
        self, batch: TransitionBatch, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-sample Bellman-target (mean, std) arrays; advances the
        target-noise decay counter once."""
        c = self.config
        m = len(batch)
        std = self.target_noise_std
        self.target_decay_count += 1

        out, _ = nn.forward(self.actor_target, batch.next_states)
        eps = rng.normal(0.0, std, size=(m, self.action_dim)) if std > 0 else (
            np.zeros((m, self.action_dim))
        )
        np.clip(eps, -c.target_noise_clip, c.target_noise_clip, out=eps)
        next_actions = np.clip(out["action"] + eps, -1.0, 1.0)

        x = np.concatenate([batch.next_states, next_actions], axis=1)
        means = np.empty((c.num_critics, m))
        stds = np.empty((c.num_critics, m))
        for i, target_net in enumerate(self.critic_targets):
            pred, _ = nn.forward(target_net, x)
            means[i] = pred["mu"][:, 0]
            stds[i] = pred["sigma"][:, 0]
        mu_k, sigma_k = gauss.fuse_batch(means, stds, c.fusion, c.fusion_variance)

        term = batch.terminated
        t_mean = np.where(term, batch.rewards, batch.rewards + c.gamma * mu_k)
        t_std = np.where(term, c.sigma_terminal, c.gamma * sigma_k)
        return t_mean, t_std

    def compute_targets(
        self, batch: TransitionBatch, rng: np.random.Generator
    ) -> list[Gaussian1D]:
        """The per-sample Bellman target distributions (no gradients flow)."""
        t_mean, t_std = self._target_arrays(batch, rng)
        return [Gaussian1D(float(mu), float(sd)) for mu, sd in zip(t_mean, t_std)]

    # --- updates -----------------------------------------------------------

    @staticmethod
    def _target_columns(
        targets: list[Gaussian1D] | tuple[np.ndarray, np.ndarray], m: int
    ) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(targets, tuple):
            t_mean, t_std = targets
        else:
            t_mean = np.array([z.mean for z in targets])
            t_std = np.array([z.std for z in targets])
        if t_mean.shape != (m,) or t_std.shape != (m,):
            raise ValueError(f"targets do not match batch of size {m}")
        return t_mean, t_std

    def critic_update(
        self,
        batch: TransitionBatch,
        targets: list[Gaussian1D] | tuple[np.ndarray, np.ndarray],
    ) -> float:
        """One Adam step on every critic; loss = mean over batch of the KL
        divergences from each critic's prediction to its (constant) target,
        summed across the ensemble."""
        m = len(batch)
        t_mean, t_std = self._target_columns(targets, m)
        x = np.concatenate([batch.states, batch.actions], axis=1)

        total = 0.0
        for i, critic in enumerate(self.critics):
            pred, cache = nn.forward(critic, x)
            mu = pred["mu"][:, 0]
            sigma = pred["sigma"][:, 0]
            total += float(gauss.kl_batch(mu, sigma, t_mean, t_std).sum())
            dmu, dsigma = gauss.kl_grad_batch(mu, sigma, t_mean, t_std)
            up = {
                "mu": (dmu / m)[:, None],
                "sigma": (dsigma / m)[:, None],
            }
            grads, _ = nn.backward(
                critic, cache, up, need_param_grads=True, need_input_grad=False
            )
            try:
                nn.adam_step(critic, grads, self.critic_opts[i], self.config.critic_lr)
            except FloatingPointError as e:
                raise FloatingPointError(f"critic {i}: {e}") from None
        return total / m

    def _fused_mean_grads(
        self, means: np.ndarray, stds: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fused mean per sample and its partials w.r.t. every critic's
        (mean, std), under the configured fusion strategy."""
        c = self.config
        n, m = means.shape
        mu_k, _ = gauss.fuse_batch(means, stds, c.fusion, c.fusion_variance)
        if c.fusion is FusionStrategy.KALMAN:
            dmu, dstd = gauss.fuse_kalman_grad_batch(means, stds, c.fusion_variance)
        elif c.fusion is FusionStrategy.MIN_MEAN:
            dmu = np.zeros((n, m))
            dmu[np.argmin(means, axis=0), np.arange(m)] = 1.0
            dstd = np.zeros((n, m))
        else:  # AVERAGE
            dmu = np.full((n, m), 1.0 / n)
            dstd = np.zeros((n, m))
        return mu_k, dmu, dstd

    def _actor_loss_and_grads(
        self, batch: TransitionBatch
    ) -> tuple[float, list[np.ndarray]]:
        """Actor loss -mean(fused mu at (s, pi(s))) and its gradient w.r.t.
        the actor parameters; touches no parameters or optimizer state."""
        c = self.config
        m = len(batch)
        act_out, act_cache = nn.forward(self.actor, batch.states)
        actions = act_out["action"]
        x = np.concatenate([batch.states, actions], axis=1)

        means = np.empty((c.num_critics, m))
        stds = np.empty((c.num_critics, m))
        caches = []
        for i, critic in enumerate(self.critics):
            pred, cache = nn.forward(critic, x)
            means[i] = pred["mu"][:, 0]
            stds[i] = pred["sigma"][:, 0]
            caches.append(cache)

        mu_k, dmu, dstd = self._fused_mean_grads(means, stds)
        loss = -float(mu_k.mean())

        # d loss / d action, accumulated through every critic's input gradient
        d_action = np.zeros((m, self.action_dim))
        for i, critic in enumerate(self.critics):
            up: dict[str, np.ndarray] = {"mu": (-dmu[i] / m)[:, None]}
            if np.any(dstd[i]):
                up["sigma"] = (-dstd[i] / m)[:, None]
            _, d_input = nn.backward(
                critic, caches[i], up,
                need_param_grads=False, need_input_grad=True,
            )
            d_action += d_input[:, self.obs_dim :]

        grads, _ = nn.backward(
            self.actor, act_cache, {"action": d_action},
            need_param_grads=True, need_input_grad=False,
        )
        return loss, grads

    def actor_update(self, batch: TransitionBatch) -> float:
        """One Adam step on the actor; critic parameters are read, not touched."""
        loss, grads = self._actor_loss_and_grads(batch)
        try:
            nn.adam_step(self.actor, grads, self.actor_opt, self.config.actor_lr)
        except FloatingPointError as e:
            raise FloatingPointError(f"actor: {e}") from None
        return loss

    def polyak_targets(self) -> None:
        nn.polyak(self.actor_target, self.actor, self.config.tau)
        for target_net, live in zip(self.critic_targets, self.critics):
            nn.polyak(target_net, live, self.config.tau)

    def train_step(
        self,
        buffer: ReplayBuffer,
        rng: np.random.Generator,
        target_rng: np.random.Generator | None = None,
    ) -> tuple[float, float | None]:
        """Sample a minibatch and do one critic update; every policy_delay-th
        call also updates the actor and Polyak-averages all targets.

        `rng` drives replay sampling; `target_rng` (defaults to `rng`) drives
        target-action smoothing noise.
        """
        if target_rng is None:
            target_rng = rng
        batch = buffer.sample_arrays(self.config.batch_size, rng)
        self.train_step_count += 1
        critic_loss = self.critic_update(batch, self._target_arrays(batch, target_rng))
        actor_loss = None
        if self.train_step_count % self.config.policy_delay == 0:
            actor_loss = self.actor_update(batch)
            self.polyak_targets()
        return critic_loss, actor_loss

    # --- diagnostics ---------------------------------------------------------

    def fused_critic(
        self, states: np.ndarray, actions: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Fused live-critic prediction (mean, std) arrays for a batch."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        x = np.concatenate([states, actions], axis=1)
        m = x.shape[0]
        means = np.empty((self.config.num_critics, m))
        stds = np.empty((self.config.num_critics, m))
        for i, critic in enumerate(self.critics):
            pred, _ = nn.forward(critic, x)
            means[i] = pred["mu"][:, 0]
            stds[i] = pred["sigma"][:, 0]
        return gauss.fuse_batch(
            means, stds, self.config.fusion, self.config.fusion_variance
        )

    def fused_prediction(self, state: np.ndarray, action: np.ndarray) -> Gaussian1D:
        mu, sd = self.fused_critic(state, action)
        return Gaussian1D(float(mu[0]), float(sd[0]))

    # --- persistence ---------------------------------------------------------

    def save_checkpoint(self, path: str) -> None:
        """Everything needed to resume bit-exactly: all parameters, optimizer
        moments and step counters, and the noise-schedule counters."""
        n = self.config.num_critics
        parts = [_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, 2 * (1 + n))]
        for params, opt in [(self.actor, self.actor_opt)] + list(
            zip(self.critics, self.critic_opts)
        ):
            parts.append(nn.serialize_params(params))
            parts.append(nn.serialize_arrays(opt.m))
            parts.append(nn.serialize_arrays(opt.v))
            parts.append(_CKPT_OPT_T.pack(opt.t))
        parts.append(nn.serialize_params(self.actor_target))
        for target_net in self.critic_targets:
            parts.append(nn.serialize_params(target_net))
        parts.append(
            _CKPT_TRAILER.pack(
                self.train_step_count,
                self.action_count,
                self.target_decay_count,
                self.explore_noise_std,
                self.target_noise_std,
            )
        )
        with open(path, "wb") as f:
            f.write(b"".join(parts))


def load_checkpoint(
    path: str, obs_dim: int, action_dim: int, config: AgentConfig
) -> Ctd4Agent:
    """Rebuild an agent from a checkpoint written by save_checkpoint.

    The caller supplies the dimensions and config (the checkpoint stores
    neither); a config whose network shapes or critic count disagree with the
    file fails loudly before any agent is returned.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _CKPT_HEADER.size:
        raise ValueError("truncated checkpoint: missing header")
    magic, version, net_count = _CKPT_HEADER.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    expected_nets = 2 * (1 + config.num_critics)
    if net_count != expected_nets:
        raise ValueError(
            f"checkpoint holds {net_count} networks but the config implies "
            f"{expected_nets} (num_critics={config.num_critics})"
        )

    agent = Ctd4Agent(obs_dim, action_dim, config, np.random.default_rng(0))
    offset = _CKPT_HEADER.size

    def read_net(spec: nn.MlpSpec) -> tuple[nn.MlpParams, nn.AdamState]:
        nonlocal offset
        params, offset = nn.deserialize_params(data, spec, offset)
        shapes = spec.layer_shapes()
        m, offset = nn.deserialize_arrays(data, shapes, offset)
        v, offset = nn.deserialize_arrays(data, shapes, offset)
        if len(data) - offset < _CKPT_OPT_T.size:
            raise ValueError("truncated checkpoint: missing optimizer counter")
        (t,) = _CKPT_OPT_T.unpack_from(data, offset)
        offset += _CKPT_OPT_T.size
        return params, nn.AdamState(m, v, t)

    agent.actor, agent.actor_opt = read_net(agent.actor_spec)
    for i in range(config.num_critics):
        agent.critics[i], agent.critic_opts[i] = read_net(agent.critic_spec)
    agent.actor_target, offset = nn.deserialize_params(
        data, agent.actor_spec, offset
    )
    for i in range(config.num_critics):
        agent.critic_targets[i], offset = nn.deserialize_params(
            data, agent.critic_spec, offset
        )
    if len(data) - offset < _CKPT_TRAILER.size:
        raise ValueError("truncated checkpoint: missing trailer")
    (
        agent.train_step_count,
        agent.action_count,
        agent.target_decay_count,
        _stored_explore_std,
        _stored_target_std,
    ) = _CKPT_TRAILER.unpack_from(data, offset)
    offset += _CKPT_TRAILER.size
    if offset != len(data):
        raise ValueError(f"checkpoint has {len(data) - offset} trailing bytes")
    return agent
