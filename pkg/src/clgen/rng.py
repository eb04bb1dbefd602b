"""Per-source-node random streams.

Every source node u owns an independent SplitMix64 stream whose state is
derived from ``(global_seed, u)``.  Because a node's draws never depend on
which worker runs it, or in what order, the generated graph is independent
of the worker count and of the partitioning scheme.
"""

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_SEED_SALT = 0xD1B54A32D192ED03

_U_GOLDEN = np.uint64(GOLDEN)
_U_SALT = np.uint64(_SEED_SALT)
_U_M1 = np.uint64(0xBF58476D1CE4E5B9)
_U_M2 = np.uint64(0x94D049BB133111EB)
_U_S30 = np.uint64(30)
_U_S27 = np.uint64(27)
_U_S31 = np.uint64(31)
_U_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def mix64(z):
    """SplitMix64 finalizer; a bijection on 64-bit words."""
    z = (z ^ (z >> _U_S30)) * _U_M1
    z = (z ^ (z >> _U_S27)) * _U_M2
    return z ^ (z >> _U_S31)


@njit(cache=True, nogil=True)
def seed_base(seed):
    return mix64(np.uint64(seed) ^ _U_SALT)


@njit(cache=True, nogil=True)
def key_from_base(base, u):
    # u -> base + u is injective and mix64 is a bijection, so keys never collide.
    return mix64(base + np.uint64(u))


@njit(cache=True, nogil=True)
def next_open01(state):
    """Advance ``state`` and return ``(new_state, r)`` with r uniform in (0, 1)."""
    while True:
        state = state + _U_GOLDEN
        r = np.float64(mix64(state) >> _U_S11) * _TWO_M53
        if r > 0.0:
            return state, r


def _mix64_int(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def node_rng_key(global_seed: int, u: int) -> int:
    """Stream key of source node ``u``: a collision-free 64-bit word.

    Plain-integer twin of ``key_from_base(seed_base(seed), u)``.
    """
    base = _mix64_int((global_seed & MASK64) ^ _SEED_SALT)
    return _mix64_int((base + u) & MASK64)


def node_rng_keys(global_seed: int, nodes) -> np.ndarray:
    """Vectorised :func:`node_rng_key` (same arithmetic, in numpy uint64)."""
    base = _mix64_int((global_seed & MASK64) ^ _SEED_SALT)
    z = np.asarray(nodes, dtype=np.uint64) + np.uint64(base)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U_S30)) * _U_M1
        z = (z ^ (z >> _U_S27)) * _U_M2
    return z ^ (z >> _U_S31)


class RngStream:
    """Pure-Python view of a node's stream; used to cross-check the kernels."""

    def __init__(self, global_seed: int, u: int):
        self.key = node_rng_key(global_seed, u)
        self.state = self.key

    def random(self) -> float:
        while True:
            self.state = (self.state + GOLDEN) & MASK64
            r = (_mix64_int(self.state) >> 11) * _TWO_M53
            if r > 0.0:
                return r
