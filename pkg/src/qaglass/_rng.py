"""Deterministic random streams.

All randomness in the package flows through these helpers.  Uniform bits
come from PCG64, a published 64-bit generator with a portable reference
implementation; Gaussians are produced by applying the inverse normal CDF
to 53-bit uniforms.  The transform consumes exactly one uniform per
Gaussian, so streams are reproducible across platforms and numpy versions
(unlike ziggurat-style rejection samplers, whose draw counts are
data-dependent).
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_TWO53 = float(1 << 53)


def splitmix64(x: int) -> int:
    """One SplitMix64 mixing step (public-domain finalizer)."""
    x = (x + _GOLDEN) & _MASK
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK
    x ^= x >> 31
    return x


def child_seed(master_seed: int, index: int) -> int:
    """Derived 64-bit seed for work unit ``index``.

    Independent of how many other units exist and of evaluation order, so
    per-realization streams do not change when a run is resumed or sharded
    across workers.
    """
    return splitmix64((master_seed & _MASK) ^ splitmix64(index & _MASK))


def standard_normals(seed: int, n: int) -> np.ndarray:
    """``n`` iid standard normals from the stream identified by ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    # (k + 0.5) / 2^53 lies strictly inside (0, 1), keeping ndtri finite.
    u = (rng.integers(0, 1 << 53, size=n, dtype=np.uint64) + 0.5) / _TWO53
    return ndtri(u)
