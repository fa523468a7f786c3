"""Deterministic Wiener-increment generation and measurement records.

The generator is pinned: PCG64 uniforms fed through an explicit
Box-Muller transform.  Nothing here depends on library-version-specific
Gaussian samplers, so a given (seed, dt, n) always reproduces the same
increments, which keeps every downstream CSV bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One SplitMix64 output step; a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_trajectory_seed(base_seed, trajectory_index):
    """Stable per-trajectory seed, injective in the index for a fixed base.

    The base seed is mixed once, the index added modulo 2**64, and the sum
    mixed again.  Addition is injective and SplitMix64 is a bijection, so
    distinct indices below 2**64 can never collide.
    """
    mixed_base = splitmix64(int(base_seed) & _MASK64)
    return splitmix64((mixed_base + int(trajectory_index)) & _MASK64)


def standard_normals(rng, n):
    """Draw ``n`` standard normals via Box-Muller on PCG64 uniforms."""
    m = (int(n) + 1) // 2
    u1 = 1.0 - rng.random(m)  # in (0, 1]; avoids log(0)
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m, dtype=float)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[: int(n)]


@dataclass(frozen=True)
class WienerPath:
    """A realized sequence of i.i.d. Normal(0, dt) increments."""

    dt: float
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        inc = np.asarray(self.increments, dtype=float)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def n_steps(self):
        return int(self.increments.shape[0])

    @property
    def t_final(self):
        return self.n_steps * self.dt

    @classmethod
    def generate(cls, n_steps, dt, seed):
        """Generate a reproducible path of ``n_steps`` increments."""
        if n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {n_steps}")
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
        increments = standard_normals(rng, n_steps) * np.sqrt(dt)
        return cls(dt=float(dt), increments=increments, seed=int(seed))

    def write_csv(self, path):
        """Debug dump: one (step, dW) row per increment."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# wiener path: seed={self.seed} dt={self.dt!r} n={self.n_steps}\n")
            fh.write("step,dW\n")
            for k, dw in enumerate(self.increments):
                fh.write(f"{k},{float(dw)!r}\n")


def generate_wiener(n_steps, dt, seed):
    return WienerPath.generate(n_steps, dt, seed)


def ensemble_increments(base_seed, n_traj, n_steps, dt, first_index=0):
    """Increment matrix (n_traj, n_steps); row i uses the seed derived for
    trajectory ``first_index + i``, so results do not depend on batching."""
    out = np.empty((int(n_traj), int(n_steps)), dtype=float)
    for i in range(int(n_traj)):
        seed = derive_trajectory_seed(base_seed, first_index + i)
        out[i] = WienerPath.generate(n_steps, dt, seed).increments
    return out


@dataclass(frozen=True)
class MeasurementRecord:
    """Homodyne record y(t), one sample per driving increment."""

    times: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if times.shape != y.shape:
            raise ValueError("record times and values must have equal length")
        times.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "y", y)
