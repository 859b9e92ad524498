"""Named random substreams derived from one run seed.

Every source of randomness in a run (environment resets, exploration noise,
replay sampling, ...) gets its own generator keyed by (seed, stream name), so
streams never interact: drawing more exploration noise cannot shift replay
sampling, and the evaluation environment cannot perturb training.
"""

from __future__ import annotations

from zlib import crc32

import numpy as np

# canonical stream names used by the agent and harness
ENV = "env"
EVAL_ENV = "eval_env"
AGENT_INIT = "agent_init"
EXPLORE = "explore"
REPLAY = "replay"
TARGET_NOISE = "target_noise"


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Deterministic generator for (seed, name); distinct names independent.

    Extra integers (e.g. an evaluation-point index) key further substreams
    within one named stream.
    """
    if not name:
        raise ValueError("stream name must be non-empty")
    entropy = [seed, crc32(name.encode()), *extra]
    return np.random.default_rng(np.random.SeedSequence(entropy))
