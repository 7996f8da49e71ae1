"""Quenched disorder for the triangular-ladder Ising model.

An instance holds the clean couplings of the ladder Hamiltonian

    H = - sum_i ( j3[i] s_i s_{i+1} s_{i+2} + j2[i] s_i s_{i+2} )

together with additive noise on each coupling.  Clean couplings are drawn
from a Gaussian with mean 1 and variance sigma^2, the noise from a
Gaussian with mean 0 and variance gamma^2; the four coupling families are
drawn independently from one seeded stream.  Noisy couplings are never
stored: they are always reconstructed as ``j + xi`` so the clean and
degraded Hamiltonians cannot drift apart.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ._rng import child_seed, standard_normals
from .errors import DimensionMismatchError, InstanceParseError, InvalidSizeError

__all__ = ["LadderInstance", "generate_instance", "save_instance", "load_instance"]


@dataclass(frozen=True)
class LadderInstance:
    """One disorder realization of the ladder with ``n_sites`` spins."""

    n_sites: int
    sigma: float
    gamma: float
    seed: int
    j3: np.ndarray   # three-body couplings, one per window i..i+2
    j2: np.ndarray   # two-body cross couplings, same windows
    xi3: np.ndarray  # additive noise on j3
    xi2: np.ndarray  # additive noise on j2

    def __post_init__(self):
        if self.n_sites < 3:
            raise InvalidSizeError(f"n_sites must be >= 3, got {self.n_sites}")
        if self.sigma < 0 or self.gamma < 0:
            raise ValueError("sigma and gamma must be nonnegative")
        m = self.n_sites - 2
        for name in ("j3", "j2", "xi3", "xi2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (m,):
                raise DimensionMismatchError(
                    f"{name} must have length n_sites - 2 = {m}, got shape {arr.shape}"
                )
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_terms(self) -> int:
        return self.n_sites - 2

    @property
    def j3_noisy(self) -> np.ndarray:
        return self.j3 + self.xi3

    @property
    def j2_noisy(self) -> np.ndarray:
        return self.j2 + self.xi2


def generate_instance(n_sites: int, sigma: float, gamma: float, seed: int) -> LadderInstance:
    """Draw one disorder realization, deterministically in ``seed``."""
    if n_sites < 3:
        raise InvalidSizeError(f"n_sites must be >= 3, got {n_sites}")
    if sigma < 0 or gamma < 0:
        raise ValueError("sigma and gamma must be nonnegative")
    m = n_sites - 2
    z = standard_normals(seed, 4 * m)
    return LadderInstance(
        n_sites=n_sites,
        sigma=float(sigma),
        gamma=float(gamma),
        seed=int(seed),
        j3=1.0 + sigma * z[0:m],
        j2=1.0 + sigma * z[m:2 * m],
        xi3=gamma * z[2 * m:3 * m],
        xi2=gamma * z[3 * m:4 * m],
    )


def realization_seed(master_seed: int, index: int) -> int:
    """Seed of realization ``index`` in a sweep keyed by ``master_seed``."""
    return child_seed(master_seed, index)


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any IEEE double exactly.
    if not np.isfinite(x):
        raise ValueError(f"non-finite coupling value {x!r}")
    return format(float(x), ".17g")


def _fmt_array(arr: np.ndarray) -> str:
    return "[" + ", ".join(_fmt(v) for v in arr) + "]"


def save_instance(instance: LadderInstance, path: str | os.PathLike) -> None:
    """Write an instance as JSON with lossless decimal floats."""
    lines = [
        "{",
        f'  "n_sites": {instance.n_sites},',
        f'  "sigma": {_fmt(instance.sigma)},',
        f'  "gamma": {_fmt(instance.gamma)},',
        f'  "seed": {instance.seed},',
        f'  "j3": {_fmt_array(instance.j3)},',
        f'  "j2": {_fmt_array(instance.j2)},',
        f'  "xi3": {_fmt_array(instance.xi3)},',
        f'  "xi2": {_fmt_array(instance.xi2)}',
        "}",
    ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


_SCHEMA = {
    "n_sites": int,
    "sigma": (int, float),
    "gamma": (int, float),
    "seed": int,
    "j3": list,
    "j2": list,
    "xi3": list,
    "xi2": list,
}


def load_instance(path: str | os.PathLike) -> LadderInstance:
    """Read an instance written by :func:`save_instance`.

    Raises :class:`InstanceParseError` naming the first offending field.
    """
    with open(path, "r", encoding="ascii") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceParseError("<file>", f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InstanceParseError("<file>", "top-level value must be an object")
    for field, typ in _SCHEMA.items():
        if field not in raw:
            raise InstanceParseError(field, "missing required field")
        if not isinstance(raw[field], typ) or isinstance(raw[field], bool):
            raise InstanceParseError(field, f"expected {typ}, got {type(raw[field]).__name__}")
    m = raw["n_sites"] - 2
    for field in ("j3", "j2", "xi3", "xi2"):
        vals = raw[field]
        if len(vals) != m:
            raise InstanceParseError(field, f"expected {m} entries, got {len(vals)}")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            raise InstanceParseError(field, "entries must be numbers")
    try:
        return LadderInstance(
            n_sites=raw["n_sites"],
            sigma=float(raw["sigma"]),
            gamma=float(raw["gamma"]),
            seed=raw["seed"],
            j3=np.array(raw["j3"], dtype=np.float64),
            j2=np.array(raw["j2"], dtype=np.float64),
            xi3=np.array(raw["xi3"], dtype=np.float64),
            xi2=np.array(raw["xi2"], dtype=np.float64),
        )
    except (InvalidSizeError, DimensionMismatchError, ValueError) as exc:
        raise InstanceParseError("<file>", str(exc)) from exc
