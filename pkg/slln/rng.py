"""Counter-based random streams.

Every simulated path owns its streams. A stream is fully determined by
``(master seed, path index, channel)`` so paths can be simulated in any
order, or concurrently, and still reproduce bit for bit.
"""

from typing import Tuple

import numpy as np

# Channels
VALUES = 0
AUXILIARY = 1


class RandomStream:
    """A Philox stream keyed by a seed and a spawn key."""

    def __init__(self, seed: int, path_index: int = 0, channel: int = VALUES):
        self.seed = int(seed)
        self.path_index = int(path_index)
        self.channel = int(channel)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.path_index, self.channel))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.seed, self.path_index, self.channel)

    def uniform(self) -> float:
        """Next uniform on [0, 1)."""
        return float(self._generator.random())

    def uniforms(self, count: int) -> np.ndarray:
        """Next ``count`` uniforms on [0, 1), in stream order."""
        return self._generator.random(int(count))

    def __repr__(self):
        return f"<RandomStream(seed={self.seed}, path={self.path_index}, channel={self.channel})>"


def path_streams(seed: int, path_index: int) -> Tuple[RandomStream, RandomStream]:
    """Value stream and auxiliary (law-selection) stream for one path."""
    return RandomStream(seed, path_index, VALUES), RandomStream(seed, path_index, AUXILIARY)
