"""Reproducible randomness built on the Philox counter-based generator.

Two entry points:

* ``stream(seed, *path)`` -- a ``numpy.random.Generator`` whose key is derived
  from the seed and a path of tags, so independent consumers never collide.
* ``normals(seed, index, shape)`` -- Gaussian draws where ``(seed, index)``
  fully determines every value via Box-Muller on explicit counter positions.
  Workers can shard an index range and reproduce exactly the same numbers.
"""

import hashlib

import numpy as np

_TWO53 = float(2**53)


def _key(seed: int, path: tuple) -> np.ndarray:
    """Derive a 128-bit Philox key from a seed and a tag path."""
    h = hashlib.sha256(repr((int(seed),) + tuple(path)).encode()).digest()
    return np.frombuffer(h[:16], dtype=np.uint64)


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for the given (seed, path) combination."""
    return np.random.Generator(np.random.Philox(key=_key(seed, path)))


def _uniforms_at(seed: int, word_index: int, count: int, path: tuple) -> np.ndarray:
    """``count`` uniforms in (0, 1], consuming one 64-bit word each, starting
    at absolute word position ``word_index`` of the (seed, path) stream."""
    bitgen = np.random.Philox(key=_key(seed, path))
    bitgen.advance(int(word_index))
    words = np.random.Generator(bitgen).integers(
        0, 2**64, size=count, dtype=np.uint64, endpoint=False
    )
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53


def normals(seed: int, index: int, shape, path: tuple = ()) -> np.ndarray:
    """Standard normal block addressed by (seed, index).

    Draw ``i`` (flattened) consumes uniform words ``2*(index+i)`` and
    ``2*(index+i)+1`` via Box-Muller, so overlapping or re-ordered requests
    return identical values.
    """
    shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
    n = int(np.prod(shape)) if shape else 1
    u = _uniforms_at(seed, 2 * int(index), 2 * n, path)
    u1, u2 = u[0::2], u[1::2]
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return z.reshape(shape)
