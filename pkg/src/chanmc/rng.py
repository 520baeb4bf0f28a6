"""Counter-based random streams keyed by (seed, proton index).

Draw ``n`` of proton ``i`` is ``mix64(key(seed, i) + (n + 1) * GOLDEN)``, the
SplitMix64 output function applied to a Weyl sequence.  Any draw can be
computed directly from its coordinates, so results never depend on how
protons are distributed over workers.  The compiled kernel implements the
same function bit for bit.

Draw layout per proton: 0, 1 impact position; 2, 3 initial angles;
``4 + 2 s`` and ``5 + 2 s`` the scattering kick of integration step ``s``.
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53

DRAW_POSITION = 0
DRAW_ANGLE = 2
DRAW_KICK = 4


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed, index):
    """64-bit key of the stream owned by proton ``index``."""
    seed = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(mix64(seed) + index * GOLDEN)


def raw(key, counter):
    key = np.asarray(key, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(key + (counter + np.uint64(1)) * GOLDEN)


def uniform(key, counter):
    """Uniform doubles in [0, 1) with 53 random bits."""
    return (raw(key, counter) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def normal_pair(key, counter):
    """Two independent standard normals from draws ``counter`` and ``counter + 1``.

    Box-Muller on ``u1`` in (0, 1] and ``u2`` in [0, 1).
    """
    u1 = 1.0 - uniform(key, counter)
    u2 = uniform(key, np.asarray(counter, dtype=np.uint64) + np.uint64(1))
    rad = np.sqrt(-2.0 * np.log(u1))
    return rad * np.cos(2.0 * np.pi * u2), rad * np.sin(2.0 * np.pi * u2)
