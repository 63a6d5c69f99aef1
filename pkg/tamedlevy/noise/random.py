"""Counter-based random streams for noise generation.

Every draw comes from a Philox generator keyed by (master seed, path index,
stream). A path's noise therefore depends only on its own key, never on how
many paths were drawn before it or on which worker drew it. Gaussian and
exponential variates go through the inverse CDF so each variate consumes
exactly one uniform.
"""

import enum

import numpy as np
from scipy.special import ndtri

__all__ = [
    "Stream",
    "generator",
    "open_uniforms",
    "seed_key",
    "standard_normals",
]

_SEED_MASK = (1 << 64) - 1


class Stream(enum.IntEnum):
    GAUSSIAN = 0
    EXPONENTIAL = 1
    MARK = 2
    BRIDGE = 3


def seed_key(seed: int) -> int:
    """Fold any integer seed (negative ones included) into 64 bits."""
    return int(seed) & _SEED_MASK


def generator(
    seed: int, path_index: int, stream: Stream
) -> np.random.Generator:
    """
    Return the generator for one (seed, path, stream) key.
    """
    entropy = [seed_key(seed), int(path_index), int(stream)]
    bit_generator = np.random.Philox(np.random.SeedSequence(entropy))
    return np.random.Generator(bit_generator)


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    u = rng.random(size)
    return np.where(u > 0.0, u, np.finfo(float).tiny)


def standard_normals(rng: np.random.Generator, size) -> np.ndarray:
    return ndtri(open_uniforms(rng, size))
