"""Counter-based Gaussian noise: one standard normal per (seed, particle, step).

Each value is a SplitMix64 hash of the triple pushed through Box-Muller, so no
generator state is shared between particles or threads and any increment can
be regenerated in isolation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

_SEED_MOD = 2**64


def _seed64(seed: int) -> np.uint64:
    return np.uint64(int(seed) % _SEED_MOD)


def standard_normals(seed: int, particle_ids, step: int, out: np.ndarray | None = None) -> np.ndarray:
    ids = np.ascontiguousarray(particle_ids, dtype=np.int64)
    if out is None:
        out = np.empty(ids.shape[0])
    if step < 0:
        raise ValueError("step index must be non-negative")
    kernels.gaussian_increments(_seed64(seed), ids, np.int64(step), out)
    return out


def increment(seed: int, particle: int, step: int) -> float:
    """The single standard normal for (seed, particle, step)."""
    return float(standard_normals(seed, np.array([particle]), step)[0])


@dataclass
class NoiseStream:
    """Per-particle Wiener increments sqrt(dt) * N(0, 1) for a fixed seed."""

    seed: int
    particle_ids: np.ndarray
    _buf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.particle_ids = np.ascontiguousarray(self.particle_ids, dtype=np.int64)
        self._buf = np.empty(self.particle_ids.shape[0])

    def normals(self, step: int) -> np.ndarray:
        return standard_normals(self.seed, self.particle_ids, step, self._buf)

    def increments(self, step: int, dt: float) -> np.ndarray:
        return np.sqrt(dt) * self.normals(step)
