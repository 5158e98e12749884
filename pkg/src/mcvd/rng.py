"""Deterministic per-molecule random streams.

Each molecule draws from its own splitmix64 stream whose initial state is a
pure function of ``(seed, molecule index)``, so results are bit-identical
under any parallel partitioning of the molecules.  Gaussian variates use the
Marsaglia polar transform of consecutive 64-bit draws; one simulation step
consumes two accepted polar pairs (the fourth variate is discarded), with
any rejected candidate pairs part of the same stream.

All primitives are numba-compiled and shared verbatim by the simulation
kernel; the :class:`GaussianStream` wrapper exposes the same stream to plain
Python callers.
"""

from __future__ import annotations

import math

import numpy as np
from numba import float64, njit, types, uint64

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(uint64(uint64), cache=True, fastmath=True, inline="always")
def _finalize(z):
    """splitmix64 output mix (full avalanche of a 64-bit word)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(uint64(uint64, uint64), cache=True, fastmath=True, inline="always")
def stream_state(seed, index):
    """Initial splitmix64 state for stream ``index`` under ``seed``."""
    return _finalize(seed + _GAMMA * (index + _ONE))


@njit(uint64(uint64, uint64), cache=True)
def _derive(seed, key):
    return _finalize(seed ^ _finalize(key + _GAMMA))


@njit(types.UniTuple(uint64, 2)(uint64), cache=True, fastmath=True, inline="always")
def next_u64(state):
    """Advance the stream; returns (new_state, 64-bit output)."""
    state = state + _GAMMA
    return state, _finalize(state)


@njit(
    types.Tuple((uint64, float64, float64))(uint64),
    cache=True,
    fastmath=True,
    inline="always",
)
def gauss_pair(state):
    """One accepted Marsaglia polar pair; returns (new_state, g0, g1)."""
    while True:
        state, a = next_u64(state)
        state, b = next_u64(state)
        u = (a >> np.uint64(11)) * _INV_2_53 * 2.0 - 1.0
        v = (b >> np.uint64(11)) * _INV_2_53 * 2.0 - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            f = math.sqrt(-2.0 * math.log(s) / s)
            return state, u * f, v * f


@njit(
    types.Tuple((uint64, float64, float64, float64))(uint64),
    cache=True,
    fastmath=True,
    inline="always",
)
def gauss3(state):
    """Three standard normals per step (two pairs, one variate discarded)."""
    state, g0, g1 = gauss_pair(state)
    state, g2, _ = gauss_pair(state)
    return state, g0, g1, g2


def as_u64(value: int) -> np.uint64:
    """Clamp an arbitrary Python integer onto the 64-bit state space."""
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


def derive_substream_seed(seed: int, key: int) -> int:
    """Deterministic 64-bit sub-seed for (seed, key), e.g. per sweep angle."""
    return int(_derive(as_u64(seed), as_u64(key)))


class GaussianStream:
    """Python-facing view of one molecule's Gaussian stream."""

    def __init__(self, seed: int, index: int = 0):
        self._state = np.uint64(stream_state(as_u64(seed), as_u64(index)))

    def normals3(self) -> tuple[float, float, float]:
        """The three per-step normals, advancing the stream one full step."""
        state, g0, g1, g2 = gauss3(self._state)
        self._state = np.uint64(state)
        return g0, g1, g2

    def uniform01(self) -> float:
        """One uniform draw in [0, 1) from the same stream."""
        state, word = next_u64(self._state)
        self._state = np.uint64(state)
        return float((word >> np.uint64(11))) * _INV_2_53

    @property
    def state(self) -> int:
        return int(self._state)
