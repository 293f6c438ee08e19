"""Dense float64 helpers, activations, positional encoding and the seeded RNG.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64.

The random number generator is SplitMix64 used in counter mode: the n-th
64-bit output for a key ``k`` is ``mix64(k + (n + 1) * GOLDEN_GAMMA)``.
Uniforms take the top 53 bits, and Gaussians use the cosine branch of
Box-Muller on two consecutive uniforms.  Because every output depends only
on ``(key, counter)``, streams can be split by deriving new keys with
:func:`mix_seed` and never need to be shared between threads.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


# ---------------------------------------------------------------------------
# linear algebra


def as_matrix(values) -> np.ndarray:
    m = np.array(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def mat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product that refuses anything but two conforming 2-D operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"mat_mul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


class Activation(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"


def apply_activation(kind: Activation, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind is Activation.RELU:
        return np.maximum(x, 0.0)
    if kind is Activation.TANH:
        return np.tanh(x)
    if kind is Activation.IDENTITY:
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}")


@functools.lru_cache(maxsize=64)
def _positional_row(dim: int, index: int) -> np.ndarray:
    if dim <= 0 or dim % 2:
        raise ValueError(f"positional encoding needs a positive even dim, got {dim}")
    k = np.arange(dim // 2, dtype=np.float64)
    angle = index / np.power(10000.0, 2.0 * k / dim)
    row = np.empty(dim, dtype=np.float64)
    row[0::2] = np.sin(angle)
    row[1::2] = np.cos(angle)
    row.setflags(write=False)
    return row


def positional_row(dim: int, index: int) -> np.ndarray:
    """Sinusoidal encoding of position ``index`` in ``dim`` (even) channels.

    Returns a cached, read-only array.
    """
    return _positional_row(int(dim), int(index))


# ---------------------------------------------------------------------------
# random numbers


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def mix_seed(*parts: int) -> int:
    """Hash any number of integers into one 64-bit seed.

    Order matters: ``mix_seed(1, 2) != mix_seed(2, 1)``.
    """
    h = 0
    for p in parts:
        h = mix64((h + GOLDEN_GAMMA) ^ (int(p) & MASK64))
    return h


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MUL1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class RngState:
    """Immutable generator position: a 64-bit key and a draw counter."""

    key: int
    counter: int = 0

    @classmethod
    def from_seed(cls, seed: int) -> "RngState":
        return cls(key=int(seed) & MASK64, counter=0)

    def advanced(self, n: int) -> "RngState":
        return RngState(self.key, self.counter + n)


def rng_u64(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """Next ``n`` raw 64-bit outputs."""
    counters = np.arange(state.counter + 1, state.counter + n + 1, dtype=np.uint64)
    z = np.uint64(state.key) + counters * np.uint64(GOLDEN_GAMMA)
    return _mix64_array(z), state.advanced(n)


def rng_uniform_array(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """``n`` uniforms in [0, 1)."""
    raw, state = rng_u64(state, n)
    return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53, state


def rng_gaussian_array(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """``n`` standard normals; consumes ``2 n`` raw outputs."""
    u, state = rng_uniform_array(state, 2 * n)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps the log finite
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2), state


def rng_uniform(state: RngState) -> tuple[float, RngState]:
    values, state = rng_uniform_array(state, 1)
    return float(values[0]), state


def rng_gaussian(state: RngState) -> tuple[float, RngState]:
    values, state = rng_gaussian_array(state, 1)
    return float(values[0]), state


def rng_permutation(state: RngState, n: int) -> tuple[np.ndarray, RngState]:
    """Uniform random permutation of ``range(n)`` by Fisher-Yates."""
    perm = np.arange(n)
    if n < 2:
        return perm, state
    u, state = rng_uniform_array(state, n - 1)
    for i in range(n - 1, 0, -1):
        j = int(u[n - 1 - i] * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm, state
