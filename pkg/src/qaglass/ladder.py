"""Classical ground states of the triangular ladder.

The zero-temperature transfer-matrix search (`viterbi_ground_state`) runs
a dynamic program over adjacent spin pairs: because every interaction in

    E(s) = - sum_i ( j3[i] s_i s_{i+1} s_{i+2} + j2[i] s_i s_{i+2} )

involves sites at distance at most two, conditioning on (s_i, s_{i+1})
makes the chain Markov and the exact optimum costs O(N * 4 * 2) work.
`brute_force_ground_state` enumerates all configurations and is the
independent oracle for small systems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidSizeError, SizeLimitError

__all__ = [
    "SpinConfiguration",
    "classical_energy",
    "viterbi_ground_state",
    "brute_force_ground_state",
]

BRUTE_FORCE_MAX_SITES = 24

# Pair states in tie-break order: +1 sorts before -1.
_SPIN_OF_INDEX = (1, -1)


@dataclass(eq=False)
class SpinConfiguration:
    """A classical configuration: ``spins[i]`` is +1 or -1 at site i."""

    spins: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.spins, dtype=np.int8)
        if arr.ndim != 1 or arr.size < 3:
            raise InvalidSizeError("a configuration needs at least 3 sites")
        if not np.all((arr == 1) | (arr == -1)):
            raise ValueError("spins must be +1 or -1")
        arr = arr.copy()
        arr.flags.writeable = False
        self.spins = arr

    def __len__(self) -> int:
        return self.spins.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinConfiguration):
            return NotImplemented
        return self.spins.shape == other.spins.shape and bool(
            np.all(self.spins == other.spins)
        )

    def __hash__(self):
        return hash(self.spins.tobytes())


def _check_couplings(j3, j2):
    j3 = np.asarray(j3, dtype=np.float64)
    j2 = np.asarray(j2, dtype=np.float64)
    if j3.ndim != 1 or j2.shape != j3.shape:
        raise DimensionMismatchError(
            f"coupling arrays must be 1-d with equal length, got {j3.shape} and {j2.shape}"
        )
    if j3.size < 1:
        raise InvalidSizeError("need at least one interaction window (n_sites >= 3)")
    return j3, j2


def classical_energy(config: SpinConfiguration, j3, j2) -> float:
    """Ladder energy of ``config``, accumulated left to right over windows."""
    j3, j2 = _check_couplings(j3, j2)
    s = config.spins
    if s.size != j3.size + 2:
        raise DimensionMismatchError(
            f"configuration has {s.size} sites but couplings imply {j3.size + 2}"
        )
    e = 0.0
    for i in range(j3.size):
        e -= j3[i] * (s[i] * s[i + 1] * s[i + 2]) + j2[i] * (s[i] * s[i + 2])
    return float(e)


def viterbi_ground_state(j3, j2) -> tuple[SpinConfiguration, float]:
    """Exact classical minimum by dynamic programming over spin pairs.

    Ties are broken deterministically in favor of spin +1: candidate
    predecessors are scanned with +1 first and replaced only on a strictly
    lower cost, and the final pair state is chosen the same way.
    """
    j3, j2 = _check_couplings(j3, j2)
    m = j3.size
    n = m + 2

    # cost[a][b]: best energy over s_0..s_{k+1} ending in pair (a, b),
    # with a, b indices into _SPIN_OF_INDEX (so index 0 means spin +1).
    cost = [[0.0, 0.0], [0.0, 0.0]]
    back = np.empty((m, 2, 2), dtype=np.int8)
    for i in range(m):
        new_cost = [[0.0, 0.0], [0.0, 0.0]]
        for ib in (0, 1):
            sb = _SPIN_OF_INDEX[ib]
            for ic in (0, 1):
                sc = _SPIN_OF_INDEX[ic]
                best = None
                best_a = 0
                for ia in (0, 1):
                    sa = _SPIN_OF_INDEX[ia]
                    w = -(j3[i] * (sa * sb * sc) + j2[i] * (sa * sc))
                    c = cost[ia][ib] + w
                    if best is None or c < best:
                        best = c
                        best_a = ia
                new_cost[ib][ic] = best
                back[i, ib, ic] = best_a
        cost = new_cost

    best = None
    end = (0, 0)
    for ib in (0, 1):
        for ic in (0, 1):
            if best is None or cost[ib][ic] < best:
                best = cost[ib][ic]
                end = (ib, ic)

    idx = np.empty(n, dtype=np.int8)
    idx[n - 2], idx[n - 1] = end
    for i in range(m - 1, -1, -1):
        idx[i] = back[i, idx[i + 1], idx[i + 2]]
    spins = 1 - 2 * idx.astype(np.int8)
    return SpinConfiguration(spins), float(best)


def all_configuration_energies(j3, j2, n_sites: int) -> np.ndarray:
    """Energy of every configuration, indexed by bit pattern.

    Basis index x encodes the configuration via bit i of x: bit 0 means
    spin +1 at site i, bit 1 means spin -1.  Terms are accumulated in
    window order, matching :func:`classical_energy` exactly.
    """
    j3, j2 = _check_couplings(j3, j2)
    if n_sites != j3.size + 2:
        raise DimensionMismatchError(
            f"n_sites = {n_sites} inconsistent with {j3.size} windows"
        )
    if n_sites > BRUTE_FORCE_MAX_SITES:
        raise SizeLimitError(
            f"refusing full enumeration for n_sites = {n_sites} > {BRUTE_FORCE_MAX_SITES}"
        )
    x = np.arange(1 << n_sites, dtype=np.uint32)
    energies = np.zeros(1 << n_sites, dtype=np.float64)
    for i in range(n_sites - 2):
        b_i = (x >> np.uint32(i)) & np.uint32(1)
        b_j = (x >> np.uint32(i + 1)) & np.uint32(1)
        b_k = (x >> np.uint32(i + 2)) & np.uint32(1)
        # spin products from bit parities: s = 1 - 2b, so products flip
        # sign once per down spin involved.
        p3 = 1.0 - 2.0 * ((b_i ^ b_j ^ b_k).astype(np.float64))
        p2 = 1.0 - 2.0 * ((b_i ^ b_k).astype(np.float64))
        energies -= j3[i] * p3 + j2[i] * p2
    return energies


def configuration_from_index(x: int, n_sites: int) -> SpinConfiguration:
    """Decode a basis index into spins (bit 0 at site i means +1)."""
    bits = (x >> np.arange(n_sites, dtype=np.uint64)) & 1
    return SpinConfiguration(1 - 2 * bits.astype(np.int8))


def brute_force_ground_state(j3, j2) -> tuple[SpinConfiguration, float]:
    """Ground state by full enumeration (oracle, n_sites <= 24).

    Among degenerate minima the lexicographically smallest configuration
    is returned, ordering spins site by site with +1 < -1.
    """
    j3, j2 = _check_couplings(j3, j2)
    n = j3.size + 2
    energies = all_configuration_energies(j3, j2, n)
    e_min = energies.min()
    candidates = np.flatnonzero(energies == e_min)
    best = min(
        (tuple((int(x) >> i) & 1 for i in range(n)) for x in candidates),
    )
    spins = 1 - 2 * np.array(best, dtype=np.int8)
    return SpinConfiguration(spins), float(e_min)
