"""Counter-based random streams usable inside numba kernels.

Every stream is a single ``uint64`` counter advanced by the SplitMix64
increment and passed through its finalizer. Substreams are keyed, not
sequential: the stream for walk ``w`` from start node ``i`` under seed ``s``
starts at ``substream(s, i, w)``, so output does not depend on how work is
split across threads.
"""
import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def substream(seed, a, b):
    """Initial counter for the stream keyed by ``(seed, a, b)``."""
    z = mix64(np.uint64(seed) + GOLDEN * np.uint64(a + 1))
    return mix64(z + GOLDEN * np.uint64(b + 1))


@njit(cache=True, inline="always")
def next_u64(state):
    state[0] += GOLDEN
    return mix64(state[0])


@njit(cache=True, inline="always")
def uniform(state):
    """Float in [0, 1) with 53 random bits."""
    return np.float64(next_u64(state) >> _S11) * _INV53


@njit(cache=True, inline="always")
def randint(state, n):
    """Integer in [0, n)."""
    k = np.int64(uniform(state) * n)
    return k if k < n else n - 1


def new_state(seed, a=0, b=0):
    return np.array([substream(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), a, b)], dtype=np.uint64)
