"""Benchmark the compiled kernel backend against the numpy fallback.

Times the primitive kernels on training-shaped data and a full agent
train_step (the end-to-end number is what matters for run planning).

Usage: python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ctd4 import backends, nn, seeding
from ctd4.agent import AgentConfig, Ctd4Agent
from ctd4.replay import ReplayBuffer, Transition


def time_call(fn, repeats: int) -> float:
    """Best-of-runs mean microseconds per call."""
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6


def bench_primitives(repeats: int) -> list[tuple[str, float, float]]:
    # shapes mirror what one train_step actually touches: hidden activations
    # and weights are (256, 256); head activations are (256, 1)
    rng = np.random.default_rng(0)
    m, h = 256, 256
    a = rng.normal(size=(m, h))
    b = rng.normal(size=(h, h))
    bias = rng.normal(size=h)
    post = np.maximum(rng.normal(size=(m, h)), 0.0)
    pre = rng.normal(size=(m, h))
    head = rng.normal(size=(m, 1))
    p = rng.normal(size=(h, h))
    g = rng.normal(size=(h, h))
    mom = np.zeros((h, h))
    vel = np.zeros((h, h))

    cases = [
        ("matmul (256x256)@(256x256)", lambda k: k.matmul(a, b)),
        ("matmul_nt", lambda k: k.matmul_nt(a, b)),
        ("matmul_tn", lambda k: k.matmul_tn(a, b)),
        ("add_bias_relu_ (256x256)", lambda k: k.add_bias_relu_(a.copy(), bias)),
        ("relu_bwd_ (256x256)", lambda k: k.relu_bwd_(pre.copy(), post)),
        ("colsum (256x256)", lambda k: k.colsum(a)),
        ("tanh_ (256x1 head)", lambda k: k.tanh_(head.copy())),
        ("softplus_shift_ (256x1 head)", lambda k: k.softplus_shift_(head.copy(), 1e-4)),
        ("adam_ (256x256)", lambda k: k.adam_(p, g, mom, vel, 5, 3e-4, 0.9, 0.999, 1e-8)),
        ("polyak_ (256x256)", lambda k: k.polyak_(p, g, 0.005)),
    ]
    rows = []
    for label, fn in cases:
        times = {}
        for name in backends.available():
            k = backends.use(name)
            times[name] = time_call(lambda: fn(k), repeats)
        rows.append((label, times.get("python", float("nan")),
                     times.get("cython", float("nan"))))
    return rows


def bench_train_step(repeats: int) -> dict[str, float]:
    results = {}
    for name in backends.available():
        backends.use(name)
        cfg = AgentConfig()
        agent = Ctd4Agent(3, 1, cfg, seeding.substream(0, "agent_init"))
        buf = ReplayBuffer(10_000)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            s = rng.normal(size=3)
            buf.push(Transition(s, rng.uniform(-1, 1, 1), rng.uniform(), s, False))
        replay_rng = seeding.substream(0, "replay")
        target_rng = seeding.substream(0, "target_noise")
        n = max(10, repeats // 4)
        for _ in range(n // 2):  # warm caches and allocator
            agent.train_step(buf, replay_rng, target_rng)
        best = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            for _ in range(n):
                agent.train_step(buf, replay_rng, target_rng)
            best = min(best, (time.perf_counter() - t0) / n)
        results[name] = best * 1e3
    return results


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    print(f"backends available: {backends.available()}")
    print()
    print(f"{'kernel':<34}{'numpy (us)':>12}{'cython (us)':>13}{'speedup':>9}")
    for label, t_py, t_cy in bench_primitives(args.repeats):
        ratio = t_py / t_cy if t_cy == t_cy and t_cy > 0 else float("nan")
        print(f"{label:<34}{t_py:>12.1f}{t_cy:>13.1f}{ratio:>8.2f}x")
    print()
    steps = bench_train_step(args.repeats)
    for name, ms in sorted(steps.items()):
        print(f"train_step [{name:>7}]: {ms:.2f} ms "
              f"(defaults: batch 256, hidden 256x256, N=3)")
    if len(steps) == 2:
        print(f"train_step speedup: {steps['python'] / steps['cython']:.2f}x")


if __name__ == "__main__":
    main()
