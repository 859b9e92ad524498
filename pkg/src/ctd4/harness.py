"""Training/evaluation loops, multi-seed drivers, ablations, diagnostics.

The layout convention for a run directory (one per invocation):

    out_dir/
      config.json              resolved flat config, for provenance
      seed<k>_metrics.csv      one MetricsRow per evaluation point
      seed<k>_checkpoint.bin   final agent state

Ablation drivers nest that layout one level deeper (per strategy / per
ensemble size) and add a summary.csv.

Determinism: every random choice in a run flows from (seed, stream name)
through ``seeding.substream``, so two runs with the same config and seed are
bit-identical -- including the metrics CSVs, whose only non-deterministic
column (wall-clock) can be pinned by passing a deterministic ``clock``.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from . import envs, seeding
from .agent import AgentConfig, Ctd4Agent, load_checkpoint
from .envs import Env
from .gauss import FusionStrategy
from .replay import ReplayBuffer, Transition

CSV_HEADER = (
    "step,eval_mean_return,eval_std_return,critic_loss,actor_loss,"
    "explore_noise_std,wall_clock_seconds"
)

_RUN_FIELDS = (
    "env_id",
    "total_steps",
    "eval_interval",
    "eval_episodes",
    "seeds",
    "out_dir",
)


@dataclass(frozen=True, slots=True)
class RunConfig:
    env_id: str = "pendulum_swingup"
    agent: AgentConfig = AgentConfig()
    total_steps: int = 50_000
    eval_interval: int = 10_000
    eval_episodes: int = 10
    seeds: tuple[int, ...] = (0, 1, 2)
    out_dir: str = "runs"
    replay_capacity: int = 100_000

    def __post_init__(self) -> None:
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")

    def to_flat_dict(self) -> dict:
        d = {
            "env_id": self.env_id,
            "total_steps": self.total_steps,
            "eval_interval": self.eval_interval,
            "eval_episodes": self.eval_episodes,
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
            "replay_capacity": self.replay_capacity,
        }
        d.update(self.agent.to_dict())
        return d

    @classmethod
    def from_flat_dict(cls, d: dict) -> RunConfig:
        agent_keys = {f.name for f in fields(AgentConfig)}
        run_keys = set(_RUN_FIELDS) | {"replay_capacity"}
        unknown = set(d) - agent_keys - run_keys
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        agent = AgentConfig.from_dict({k: v for k, v in d.items() if k in agent_keys})
        kwargs = {k: v for k, v in d.items() if k in run_keys}
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
        return cls(agent=agent, **kwargs)


@dataclass(frozen=True, slots=True)
class MetricsRow:
    step: int
    eval_mean_return: float
    eval_std_return: float
    critic_loss: float
    actor_loss: float
    explore_noise_std: float
    wall_clock_seconds: float

    def to_line(self) -> str:
        vals = (
            self.eval_mean_return,
            self.eval_std_return,
            self.critic_loss,
            self.actor_loss,
            self.explore_noise_std,
            self.wall_clock_seconds,
        )
        return f"{self.step}," + ",".join(repr(float(v)) for v in vals)


def scale_action(env: Env, action: np.ndarray) -> np.ndarray:
    """Map an agent action in [-1, 1]^d onto the environment's action box."""
    low, high = env.action_low, env.action_high
    return np.clip(low + (action + 1.0) * 0.5 * (high - low), low, high)


def evaluate(
    agent: Ctd4Agent,
    env: Env,
    episodes: int,
    seed: int | np.random.Generator,
) -> tuple[float, float]:
    """Mean and population std of returns over full deterministic episodes.

    Reads the agent (explore=False) and touches nothing else: parameters,
    optimizer state and noise counters are bit-identical afterwards.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = np.empty(episodes)
    for ep in range(episodes):
        obs = env.reset(seed) if ep == 0 else env.reset()
        total = 0.0
        while True:
            action = agent.select_action(obs, explore=False)
            result = env.step(scale_action(env, action))
            total += result.reward
            obs = result.observation
            if result.terminated or result.truncated:
                break
        returns[ep] = total
    return float(returns.mean()), float(returns.std())


def run_training(
    config: RunConfig,
    seed: int,
    clock=None,
    eval_seed: int | None = None,
) -> tuple[str, str]:
    """Train one seed; returns (metrics csv path, checkpoint path).

    One environment step per loop iteration: act with exploration, store the
    transition, and -- once past warmup -- do exactly one train_step.  Every
    eval_interval steps the deterministic policy is scored on a separate
    evaluation environment (fresh seed stream per evaluation point) and one
    MetricsRow is appended; learning never runs during evaluation.

    ``clock`` is a zero-argument callable for the wall-clock column
    (defaults to time.perf_counter); inject a deterministic one to make the
    CSV byte-reproducible.  ``eval_seed`` defaults to ``seed`` and only
    influences evaluation streams, never training.
    """
    if clock is None:
        clock = time.perf_counter
    if eval_seed is None:
        eval_seed = seed
    os.makedirs(config.out_dir, exist_ok=True)
    write_config_echo(config)
    csv_path = os.path.join(config.out_dir, f"seed{seed}_metrics.csv")
    ckpt_path = os.path.join(config.out_dir, f"seed{seed}_checkpoint.bin")

    t0 = clock()
    env = envs.make(config.env_id)
    eval_env = envs.make(config.env_id)
    agent = Ctd4Agent(
        env.obs_dim, env.action_dim, config.agent,
        seeding.substream(seed, seeding.AGENT_INIT),
    )
    buffer = ReplayBuffer(config.replay_capacity)
    explore_rng = seeding.substream(seed, seeding.EXPLORE)
    replay_rng = seeding.substream(seed, seeding.REPLAY)
    target_rng = seeding.substream(seed, seeding.TARGET_NOISE)

    critic_losses: list[float] = []
    actor_losses: list[float] = []

    def flush_means() -> tuple[float, float]:
        c = float(np.mean(critic_losses)) if critic_losses else float("nan")
        a = float(np.mean(actor_losses)) if actor_losses else float("nan")
        critic_losses.clear()
        actor_losses.clear()
        return c, a

    with open(csv_path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        f.flush()
        obs = env.reset(seeding.substream(seed, seeding.ENV))
        for step in range(1, config.total_steps + 1):
            action = agent.select_action(obs, explore=True, rng=explore_rng)
            result = env.step(scale_action(env, action))
            buffer.push(
                Transition(obs, action, result.reward,
                           result.observation, result.terminated)
            )
            obs = (
                env.reset()
                if (result.terminated or result.truncated)
                else result.observation
            )
            if step > config.agent.warmup_steps:
                critic_loss, actor_loss = agent.train_step(
                    buffer, replay_rng, target_rng
                )
                critic_losses.append(critic_loss)
                if actor_loss is not None:
                    actor_losses.append(actor_loss)
            if step % config.eval_interval == 0:
                point = step // config.eval_interval
                mean_ret, std_ret = evaluate(
                    agent, eval_env, config.eval_episodes,
                    seeding.substream(eval_seed, seeding.EVAL_ENV, point),
                )
                c_mean, a_mean = flush_means()
                row = MetricsRow(
                    step=step,
                    eval_mean_return=mean_ret,
                    eval_std_return=std_ret,
                    critic_loss=c_mean,
                    actor_loss=a_mean,
                    explore_noise_std=agent.explore_noise_std,
                    wall_clock_seconds=clock() - t0,
                )
                f.write(row.to_line() + "\n")
                f.flush()

    agent.save_checkpoint(ckpt_path)
    return csv_path, ckpt_path


def write_config_echo(config: RunConfig) -> str:
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "config.json")
    with open(path, "w") as f:
        json.dump(config.to_flat_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def run_many(config: RunConfig, clock=None) -> list[tuple[str, str]]:
    """run_training for every seed in the config, sequentially."""
    return [run_training(config, seed, clock=clock) for seed in config.seeds]


def final_eval_mean(csv_path: str) -> float:
    """eval_mean_return of the last row, or nan for a header-only CSV."""
    with open(csv_path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return float("nan")
    return float(rows[-1]["eval_mean_return"])


def ablate_fusion(config: RunConfig, clock=None) -> dict[str, list[tuple[str, str]]]:
    """Identical multi-seed runs for each fusion strategy.

    Only the fusion strategy differs between arms; everything else, including
    the seed set, is shared.  Writes one subdirectory per strategy plus a
    summary.csv of final returns.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    outputs: dict[str, list[tuple[str, str]]] = {}
    summary_rows: list[tuple[str, int, float]] = []
    for strategy in FusionStrategy:
        sub = replace(
            config,
            agent=replace(config.agent, fusion=strategy),
            out_dir=os.path.join(config.out_dir, strategy.value),
        )
        outputs[strategy.value] = run_many(sub, clock=clock)
        for seed, (csv_path, _) in zip(sub.seeds, outputs[strategy.value]):
            summary_rows.append((strategy.value, seed, final_eval_mean(csv_path)))
    summary_path = os.path.join(config.out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as f:
        f.write("strategy,seed,final_eval_mean_return\n")
        for strategy_name, seed, mean_ret in summary_rows:
            f.write(f"{strategy_name},{seed},{repr(float(mean_ret))}\n")
    return outputs


def ablate_ensemble(
    config: RunConfig, sizes: list[int], clock=None
) -> dict[int, list[tuple[str, str]]]:
    """Identical multi-seed runs for each ensemble size N in `sizes`."""
    if not sizes:
        raise ValueError("sizes must be non-empty")
    if any(n < 1 for n in sizes):
        raise ValueError("ensemble sizes must be >= 1")
    os.makedirs(config.out_dir, exist_ok=True)
    wall = time.perf_counter if clock is None else clock
    outputs: dict[int, list[tuple[str, str]]] = {}
    summary_rows: list[tuple[int, int, float, float]] = []
    for n in sizes:
        sub = replace(
            config,
            agent=replace(config.agent, num_critics=n),
            out_dir=os.path.join(config.out_dir, f"n{n}"),
        )
        runs = []
        for seed in sub.seeds:
            t0 = wall()
            paths = run_training(sub, seed, clock=clock)
            elapsed = wall() - t0
            runs.append(paths)
            summary_rows.append((n, seed, final_eval_mean(paths[0]), elapsed))
        outputs[n] = runs
    summary_path = os.path.join(config.out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as f:
        f.write("num_critics,seed,final_eval_mean_return,wall_clock_seconds\n")
        for n, seed, mean_ret, elapsed in summary_rows:
            f.write(f"{n},{seed},{repr(float(mean_ret))},{repr(float(elapsed))}\n")
    return outputs


def bias_diagnostic(
    checkpoint_path: str,
    env_id: str,
    rollouts: int,
    seed: int,
    agent_config: AgentConfig,
    out_path: str,
) -> str:
    """Fused critic estimate vs the actual discounted return of the policy.

    From each of `rollouts` start states: record the fused critic mean at
    (s0, pi(s0)) and the empirical discounted Monte-Carlo return of the
    deterministic policy rolled to episode end.  The signed difference
    (critic minus reality) is the overestimation bias; a final summary row
    holds the means.
    """
    if rollouts < 0:
        raise ValueError("rollouts must be >= 0")
    env = envs.make(env_id)
    agent = load_checkpoint(checkpoint_path, env.obs_dim, env.action_dim, agent_config)
    gamma = agent_config.gamma

    rows: list[tuple[int, float, float]] = []
    for r in range(rollouts):
        obs = env.reset(seeding.substream(seed, seeding.EVAL_ENV, r))
        first_action = agent.select_action(obs, explore=False)
        critic_mean = float(agent.fused_critic(obs, first_action)[0][0])
        mc_return = 0.0
        discount = 1.0
        action = first_action
        while True:
            result = env.step(scale_action(env, action))
            mc_return += discount * result.reward
            discount *= gamma
            obs = result.observation
            if result.terminated or result.truncated:
                break
            action = agent.select_action(obs, explore=False)
        rows.append((r, critic_mean, mc_return))

    dirname = os.path.dirname(out_path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(out_path, "w", newline="") as f:
        f.write("rollout,critic_mean,mc_return,bias\n")
        for r, critic_mean, mc_return in rows:
            bias = critic_mean - mc_return
            f.write(
                f"{r},{repr(critic_mean)},{repr(mc_return)},{repr(bias)}\n"
            )
        if rows:
            cm = float(np.mean([x[1] for x in rows]))
            mc = float(np.mean([x[2] for x in rows]))
            f.write(f"mean,{repr(cm)},{repr(mc)},{repr(cm - mc)}\n")
    return out_path
