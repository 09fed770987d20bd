"""SplitMix64 streams usable inside numba kernels.

numpy's Generator cannot be re-seeded cheaply per walk inside compiled code,
and the walker needs an independent stream for every (start node, walk index)
pair so walks can be generated in any order.
"""

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0
MASK64 = (1 << 64) - 1


@numba.njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def split(seed, a, b):
    """Derive an independent stream state from ``seed`` and two indices."""
    s = mix64(np.uint64(seed) + _GOLDEN)
    s = mix64(s ^ (np.uint64(a) + _GOLDEN))
    return mix64(s ^ (np.uint64(b) * _M1 + _GOLDEN))


@numba.njit(cache=True)
def next_u64(state):
    """Advance a one-element uint64 state array and return the next output."""
    state[0] = state[0] + _GOLDEN
    return mix64(state[0])


@numba.njit(cache=True)
def next_float(state):
    return np.float64(next_u64(state) >> _S11) * _INV53


@numba.njit(cache=True)
def next_below(state, n):
    return np.int64(next_float(state) * n)
