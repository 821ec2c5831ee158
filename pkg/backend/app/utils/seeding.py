"""Independent random streams derived from one run seed."""

from dataclasses import dataclass

import numpy as np

STREAMS = ("init", "noise", "exploration", "replay", "env")


@dataclass
class SeedStreams:
    """One generator per consumer so that, e.g., enabling noisy layers does not shift replay sampling."""

    seed: int
    init_seed: int
    noise: np.random.Generator
    exploration: np.random.Generator
    replay: np.random.Generator
    env_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        children = np.random.SeedSequence(seed).spawn(len(STREAMS))
        by_name = dict(zip(STREAMS, children))
        return cls(
            seed=seed,
            init_seed=int(by_name["init"].generate_state(1)[0]),
            noise=np.random.default_rng(by_name["noise"]),
            exploration=np.random.default_rng(by_name["exploration"]),
            replay=np.random.default_rng(by_name["replay"]),
            env_seed=int(by_name["env"].generate_state(1)[0]),
        )
