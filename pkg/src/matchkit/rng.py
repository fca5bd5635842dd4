"""Counter-based random streams.

Each logical stream is identified by ``(seed, *key)`` and backed by a Philox
bit generator, so draw ``k`` of a stream depends only on the key and ``k``.
Drawing a longer stream reproduces every shorter one as a prefix, which lets a
population grow without disturbing draws of existing agents.
"""

from __future__ import annotations

import numpy as np

EULER_GAMMA = float(np.euler_gamma)

# stream tags
MEN, WOMEN, DRAWS = 0, 1, 2


def philox(seed: int, *key: int) -> np.random.Philox:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Philox(key=ss.generate_state(2, dtype=np.uint64))


def open_uniforms(seed: int, key: tuple[int, ...], shape: tuple[int, int]) -> np.ndarray:
    """Uniforms in the open interval (0, 1), row-major from the start of the stream."""
    count = int(np.prod(shape))
    raw = philox(seed, *key).random_raw(count)
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
    return u.reshape(shape)


def gumbel(seed: int, key: tuple[int, ...], shape: tuple[int, int],
           scale: float = 1.0) -> np.ndarray:
    """Standard Gumbel (location 0) draws scaled by ``scale``; mean is scale*gamma."""
    return -scale * np.log(-np.log(open_uniforms(seed, key, shape)))


def normal(seed: int, key: tuple[int, ...], shape: tuple[int, int],
           scale: float = 1.0) -> np.ndarray:
    from scipy.special import ndtri
    return scale * ndtri(open_uniforms(seed, key, shape))
