"""Matrix-product-state ground-state search for the noisy ladder.

Variational two-site DMRG against a compact matrix-product operator.
Because every interaction spans at most three consecutive sites, the MPO
closes with five internal states independent of chain length:

    0  nothing placed yet
    1  first Z of a three-body term placed (coefficient attached there)
    2  first Z of a two-body cross term placed
    3  one more Z due on the next site
    4  term complete

The ground state at the target field is reached by field annealing: the
search starts in a strong transverse field, where the ground state is
nearly a product state, and the field is stepped down along a schedule,
each stage warm-starting from the previous one.

Tensor index conventions (all arrays real float64):
    MPS tensor  A[i] : (left bond, physical, right bond), physical index
                       0 = spin up (+1), 1 = spin down (-1)
    MPO tensor  W[i] : (left state, right state, bra physical, ket physical)
    left env    L[i] : (bra bond, mpo state, ket bond), sites < i absorbed
    right env   R[i] : (bra bond, mpo state, ket bond), sites > i absorbed
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from ._lanczos import lowest_eigenpair
from ._rng import child_seed, standard_normals
from .disorder import LadderInstance
from .errors import (
    CheckpointError,
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    SizeLimitError,
)

__all__ = [
    "AnnealSchedule",
    "LadderMPO",
    "MatrixProductState",
    "build_mpo",
    "default_schedule",
    "dmrg_ground_state",
    "dmrg_refine",
    "energy_expectation",
    "load_checkpoint",
    "mps_all_magnetizations",
    "mps_magnetization_z",
    "random_product_mps",
    "save_checkpoint",
]

MPO_BOND_DIMENSION = 5
TRUNCATION_CUTOFF = 1e-12   # relative singular-value cutoff
LOCAL_SOLVER_TOL = 1e-11
SWEEP_ENERGY_TOL = 1e-10
DENSE_LIMIT_SITES = 20      # guard for to-dense conversions in diagnostics

_SITE_SEED_TAG = 0x3D0C9A

_PAULI_Z = np.diag([1.0, -1.0])
_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_IDENT = np.eye(2)


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class AnnealSchedule:
    """Field values visited on the way down to ``gamma_target``."""

    gamma_start: float
    gamma_target: float
    n_steps: int
    interpolation: str = "geometric"

    def __post_init__(self):
        if self.n_steps < 1:
            raise DomainError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.gamma_start >= self.gamma_target >= 0.0:
            raise DomainError(
                f"need gamma_start >= gamma_target >= 0, got "
                f"{self.gamma_start} and {self.gamma_target}"
            )
        if self.interpolation not in ("geometric", "linear"):
            raise DomainError(f"unknown interpolation {self.interpolation!r}")

    def values(self) -> np.ndarray:
        """Monotone nonincreasing sequence ending exactly at the target."""
        if self.n_steps == 1 or self.gamma_start == self.gamma_target:
            return np.full(self.n_steps, float(self.gamma_target))
        if self.interpolation == "linear":
            return np.linspace(self.gamma_start, self.gamma_target, self.n_steps)
        if self.gamma_target > 0.0:
            return np.geomspace(self.gamma_start, self.gamma_target, self.n_steps)
        # geometric ramp cannot reach zero; decay four decades, then land on it
        vals = np.empty(self.n_steps)
        vals[:-1] = np.geomspace(self.gamma_start, self.gamma_start * 1e-4,
                                 self.n_steps - 1)
        vals[-1] = 0.0
        return vals


def default_schedule(gamma_target: float, n_steps: int = 8) -> AnnealSchedule:
    """Standard anneal: start high enough that the field term dominates."""
    start = max(10.0, 4.0 * gamma_target)
    return AnnealSchedule(start, float(gamma_target), n_steps, "geometric")


# ---------------------------------------------------------------------------
# MPO


@dataclass(frozen=True)
class LadderMPO:
    instance: LadderInstance
    gamma_field: float
    tensors: tuple = dataclass_field(repr=False, default=())

    @property
    def n_sites(self) -> int:
        return self.instance.n_sites

    def to_dense(self) -> np.ndarray:
        """Full 2^N x 2^N matrix (small systems only; used for validation)."""
        n = self.n_sites
        if n > DENSE_LIMIT_SITES:
            raise SizeLimitError(f"dense conversion limited to {DENSE_LIMIT_SITES} sites")
        acc = np.ones((1, 1, 1))
        for w in self.tensors:
            t = np.tensordot(acc, w, axes=(2, 0))   # (out, in, wr, s_out, s_in)
            t = t.transpose(3, 0, 4, 1, 2)          # (s_out, out, s_in, in, wr)
            d = acc.shape[0]
            acc = t.reshape(2 * d, 2 * d, w.shape[1])
        return acc[:, :, 0]


def build_mpo(instance: LadderInstance, gamma_field: float) -> LadderMPO:
    """MPO for the noisy ladder Hamiltonian at the given transverse field."""
    if gamma_field < 0:
        raise DomainError(f"gamma_field must be >= 0, got {gamma_field}")
    n = instance.n_sites
    j3 = instance.j3_noisy
    j2 = instance.j2_noisy
    g = float(gamma_field)
    tensors = []
    for i in range(n):
        w = np.zeros((MPO_BOND_DIMENSION, MPO_BOND_DIMENSION, 2, 2))
        w[0, 0] = _IDENT
        w[4, 4] = _IDENT
        w[0, 4] = -g * _PAULI_X
        if i <= n - 3:  # windows start at sites 0 .. n-3
            w[0, 1] = -j3[i] * _PAULI_Z
            w[0, 2] = -j2[i] * _PAULI_Z
        w[1, 3] = _PAULI_Z
        w[2, 3] = _IDENT
        w[3, 4] = _PAULI_Z
        if i == 0:
            w = w[0:1, :, :, :]
        if i == n - 1:
            w = w[:, 4:5, :, :]
        tensors.append(w)
    return LadderMPO(instance=instance, gamma_field=g, tensors=tuple(tensors))


# ---------------------------------------------------------------------------
# MPS


class MatrixProductState:
    """Mixed-canonical MPS: isometries left and right of ``center``.

    The constructor trusts the caller on the canonical-form invariant;
    tensors produced by :func:`random_product_mps` (all bonds 1) or by
    the DMRG driver satisfy it.  ``canonical_defect`` measures violations.
    """

    def __init__(self, tensors, center: int = 0):
        self.tensors = [np.asarray(t, dtype=np.float64) for t in tensors]
        self.center = center
        self.diagnostics: dict = {}
        self._validate_shapes()

    def _validate_shapes(self):
        n = len(self.tensors)
        if n < 3:
            raise DimensionMismatchError("an MPS needs at least 3 sites")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionMismatchError("boundary bond dimensions must be 1")
        for i in range(n - 1):
            if self.tensors[i].shape[2] != self.tensors[i + 1].shape[0]:
                raise DimensionMismatchError(f"bond mismatch between sites {i} and {i+1}")
        if not 0 <= self.center < n:
            raise DimensionMismatchError(f"center {self.center} out of range")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def normalize(self):
        c = self.tensors[self.center]
        self.tensors[self.center] = c / np.linalg.norm(c)

    def move_center_to(self, site: int):
        """Shift the canonical center by QR factorizations (exact)."""
        if not 0 <= site < self.n_sites:
            raise DimensionMismatchError(f"site {site} out of range")
        while self.center < site:
            c = self.center
            a = self.tensors[c]
            dl, _, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * 2, dr))
            self.tensors[c] = q.reshape(dl, 2, -1)
            self.tensors[c + 1] = np.tensordot(r, self.tensors[c + 1], axes=(1, 0))
            self.center = c + 1
        while self.center > site:
            c = self.center
            a = self.tensors[c]
            dl, _, dr = a.shape
            # LQ via QR of the transpose: a = (r q)^T with q^T right-isometric
            q, r = np.linalg.qr(a.reshape(dl, 2 * dr).T)
            self.tensors[c] = q.T.reshape(-1, 2, dr)
            self.tensors[c - 1] = np.tensordot(self.tensors[c - 1], r.T, axes=(2, 0))
            self.center = c - 1

    def canonical_defect(self) -> float:
        """Worst isometry violation among the off-center tensors."""
        worst = 0.0
        for i, a in enumerate(self.tensors):
            dl, _, dr = a.shape
            if i < self.center:
                m = a.reshape(dl * 2, dr)
                worst = max(worst, float(np.abs(m.T @ m - np.eye(dr)).max()))
            elif i > self.center:
                m = a.reshape(dl, 2 * dr)
                worst = max(worst, float(np.abs(m @ m.T - np.eye(dl)).max()))
        return worst

    def copy(self) -> "MatrixProductState":
        dup = MatrixProductState([t.copy() for t in self.tensors], self.center)
        dup.diagnostics = dict(self.diagnostics)
        return dup

    def to_statevector(self) -> np.ndarray:
        """Dense amplitudes indexed by bit pattern (site i at bit i)."""
        if self.n_sites > DENSE_LIMIT_SITES:
            raise SizeLimitError(f"dense conversion limited to {DENSE_LIMIT_SITES} sites")
        acc = np.ones((1, 1))
        for k, a in enumerate(self.tensors):
            t = np.tensordot(acc, a, axes=(1, 0))      # (x, s, r)
            acc = t.transpose(1, 0, 2).reshape(-1, a.shape[2])
        return acc.ravel()


def random_product_mps(n_sites: int, seed: int) -> MatrixProductState:
    """Seeded random product state (bond dimension 1)."""
    tensors = []
    for i in range(n_sites):
        v = standard_normals(child_seed(seed, _SITE_SEED_TAG + i), 2)
        v /= np.linalg.norm(v)
        tensors.append(v.reshape(1, 2, 1))
    return MatrixProductState(tensors, center=0)


# ---------------------------------------------------------------------------
# environments and local problem


def _advance_left(env, w, a):
    t = np.tensordot(env, a, axes=([2], [0]))       # (bra, mpo, s_ket, r_ket)
    t = np.tensordot(t, w, axes=([1, 2], [0, 3]))   # (bra, r_ket, wr, s_out)
    t = np.tensordot(t, a, axes=([0, 3], [0, 1]))   # (r_ket, wr, r_bra)
    return np.ascontiguousarray(t.transpose(2, 1, 0))


def _advance_right(env, w, a):
    t = np.tensordot(a, env, axes=([2], [2]))       # (l_ket, s_ket, bra, mpo)
    t = np.tensordot(t, w, axes=([3, 1], [1, 3]))   # (l_ket, bra, wl, s_out)
    t = np.tensordot(t, a, axes=([3, 1], [1, 2]))   # (l_ket, wl, l_bra)
    return np.ascontiguousarray(t.transpose(2, 1, 0))


def _two_site_matvec(lenv, w1, w2, renv):
    dl = lenv.shape[0]
    dr = renv.shape[0]
    shape = (dl, 2, 2, dr)

    def matvec(x):
        th = x.reshape(shape)
        t = np.tensordot(lenv, th, axes=([2], [0]))      # (bra, wl, s1, s2, r)
        t = np.tensordot(t, w1, axes=([1, 2], [0, 3]))   # (bra, s2, r, wm, s1')
        t = np.tensordot(t, w2, axes=([3, 1], [0, 3]))   # (bra, r, s1', wr, s2')
        t = np.tensordot(t, renv, axes=([3, 1], [1, 2]))  # (bra, s1', s2', rbra)
        return t.ravel()

    return matvec, shape


def _split_two_site(theta, chi, direction):
    """SVD split of a two-site tensor; returns tensors and truncation weight."""
    dl, _, _, dr = theta.shape
    u, s, vt = np.linalg.svd(theta.reshape(dl * 2, 2 * dr), full_matrices=False)
    total = float((s ** 2).sum())
    keep = int(np.sum(s > TRUNCATION_CUTOFF * s[0])) if s[0] > 0 else 1
    keep = max(1, min(chi, keep))
    trunc = float((s[keep:] ** 2).sum() / total) if total > 0 else 0.0
    s_kept = s[:keep] / np.linalg.norm(s[:keep])
    if direction == "right":
        left = u[:, :keep].reshape(dl, 2, keep)
        right = (s_kept[:, None] * vt[:keep]).reshape(keep, 2, dr)
    else:
        left = (u[:, :keep] * s_kept).reshape(dl, 2, keep)
        right = vt[:keep].reshape(keep, 2, dr)
    return left, right, trunc


# ---------------------------------------------------------------------------
# DMRG driver


def _check_compatible(mps: MatrixProductState, mpo: LadderMPO, chi: int):
    if mps.n_sites != mpo.n_sites:
        raise DimensionMismatchError(
            f"MPS has {mps.n_sites} sites, MPO has {mpo.n_sites}"
        )
    if chi < 2:
        raise DomainError(f"chi must be >= 2, got {chi}")


def dmrg_refine(
    mps: MatrixProductState,
    mpo: LadderMPO,
    chi: int = 64,
    sweeps: int = 30,
    sweep_tol: float = SWEEP_ENERGY_TOL,
    stage: str | None = None,
) -> float:
    """Sweep at a fixed MPO until the energy stops moving; in place.

    Each two-site subproblem is solved by the shared Lanczos routine with
    the current tensor pair as the start vector, so local updates can only
    lower the variational energy (up to truncation, which is tracked in
    ``mps.diagnostics``).  Stops when the energy changes by less than
    ``sweep_tol`` over a full sweep, or after ``sweeps`` sweeps.
    """
    _check_compatible(mps, mpo, chi)
    n = mps.n_sites
    w = mpo.tensors
    mps.move_center_to(0)

    renv = [None] * (n + 1)
    renv[n - 1] = np.ones((1, 1, 1))
    for i in range(n - 1, 0, -1):
        renv[i - 1] = _advance_right(renv[i], w[i], mps.tensors[i])
    lenv = [None] * n
    lenv[0] = np.ones((1, 1, 1))

    energy = np.inf
    half_sweep_energies: list[list[float]] = []
    trunc_weights: list[float] = []

    for sweep in range(sweeps):
        prev_energy = energy
        for direction in ("right", "left"):
            bonds = range(n - 1) if direction == "right" else range(n - 2, -1, -1)
            local_energies = []
            for i in bonds:
                matvec, shape = _two_site_matvec(lenv[i], w[i], w[i + 1], renv[i + 1])
                theta0 = np.tensordot(mps.tensors[i], mps.tensors[i + 1], axes=(2, 0))
                dim = theta0.size
                res = lowest_eigenpair(
                    matvec, dim, theta0.ravel(),
                    tol=LOCAL_SOLVER_TOL, max_steps=max(200, 4 * dim if dim < 64 else 200),
                    block=min(dim - 1, 30) if dim > 16 else 16,
                )
                theta = res.vector.reshape(shape)
                left, right, trunc = _split_two_site(theta, chi, direction)
                mps.tensors[i] = left
                mps.tensors[i + 1] = right
                trunc_weights.append(trunc)
                local_energies.append(res.value)
                if direction == "right":
                    mps.center = i + 1
                    lenv[i + 1] = _advance_left(lenv[i], w[i], left)
                else:
                    mps.center = i
                    renv[i] = _advance_right(renv[i + 1], w[i + 1], right)
            half_sweep_energies.append(local_energies)
            energy = local_energies[-1]
        if not np.isfinite(energy):
            raise ConvergenceError(
                f"DMRG energy became non-finite (stage {stage!r})",
                residual=None, iterations=sweep + 1, stage=stage,
            )
        if energy > prev_energy + 1e-6:
            raise ConvergenceError(
                f"DMRG energy rose from {prev_energy!r} to {energy!r} (stage {stage!r})",
                residual=energy - prev_energy, iterations=sweep + 1, stage=stage,
            )
        if abs(energy - prev_energy) < sweep_tol:
            break

    mps.diagnostics["half_sweep_energies"] = half_sweep_energies
    mps.diagnostics["truncation_weights"] = trunc_weights
    mps.diagnostics["sweeps_run"] = sweep + 1
    mps.normalize()
    return float(energy)


def dmrg_ground_state(
    mpo: LadderMPO,
    chi: int = 64,
    sweeps: int = 30,
    schedule: AnnealSchedule | None = None,
    seed: int = 0,
    checkpoint_path: str | os.PathLike | None = None,
) -> tuple[MatrixProductState, float]:
    """Annealed two-site DMRG ground state of ``mpo``.

    The state is initialized as a seeded random product state, annealed
    through the schedule's field values (the last of which must be the
    MPO's own field), and refined at each stage.  If ``checkpoint_path``
    is given, the state is saved after every stage and a matching
    checkpoint is resumed from instead of recomputing earlier stages.
    """
    if schedule is None:
        schedule = default_schedule(mpo.gamma_field)
    if abs(schedule.gamma_target - mpo.gamma_field) > 1e-12:
        raise DomainError(
            f"schedule targets field {schedule.gamma_target} but MPO was built "
            f"at {mpo.gamma_field}"
        )
    values = schedule.values()
    start_stage = 0
    mps = None
    if checkpoint_path is not None and os.path.exists(checkpoint_path):
        chk = load_checkpoint(checkpoint_path)
        want = _checkpoint_header(mpo, chi, schedule, seed)
        got = {k: chk[k] for k in want}
        if got != want:
            raise CheckpointError(
                f"checkpoint header mismatch: saved {got}, expected {want}"
            )
        mps = chk["mps"]
        start_stage = int(chk["stage"]) + 1
    if mps is None:
        mps = random_product_mps(mpo.n_sites, seed)

    stage_energies = list(mps.diagnostics.get("stage_energies", []))
    energy = stage_energies[-1] if stage_energies else np.nan
    for stage in range(start_stage, len(values)):
        g = float(values[stage])
        stage_mpo = build_mpo(mpo.instance, g)
        energy = dmrg_refine(mps, stage_mpo, chi=chi, sweeps=sweeps,
                             stage=f"{stage}:gamma={g:g}")
        stage_energies.append(energy)
        mps.diagnostics["stage_energies"] = stage_energies
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, mps, mpo=mpo, chi=chi,
                            schedule=schedule, seed=seed, stage=stage)
    mps.diagnostics["stage_energies"] = stage_energies
    return mps, float(energy)


# ---------------------------------------------------------------------------
# measurements


def mps_magnetization_z(mps: MatrixProductState, site: int) -> float:
    """<Z_site>, evaluated at the canonical center (moved there if needed)."""
    if not 0 <= site < mps.n_sites:
        raise DimensionMismatchError(f"site {site} out of range")
    mps.move_center_to(site)
    a = mps.tensors[site]
    nrm2 = float(np.sum(a * a))
    up = float(np.sum(a[:, 0, :] ** 2))
    down = float(np.sum(a[:, 1, :] ** 2))
    return (up - down) / nrm2


def mps_all_magnetizations(mps: MatrixProductState) -> np.ndarray:
    """<Z_i> for all sites with a single center pass."""
    out = np.empty(mps.n_sites)
    for i in range(mps.n_sites):
        out[i] = mps_magnetization_z(mps, i)
    return out


def energy_expectation(mps: MatrixProductState, mpo: LadderMPO) -> float:
    """<psi|H|psi> / <psi|psi> by full environment contraction.

    Does not assume canonical form; the norm is contracted explicitly.
    """
    if mps.n_sites != mpo.n_sites:
        raise DimensionMismatchError("site count mismatch")
    env = np.ones((1, 1, 1))
    env2 = np.ones((1, 1))
    for i in range(mps.n_sites):
        a = mps.tensors[i]
        env = _advance_left(env, mpo.tensors[i], a)
        t = np.tensordot(env2, a, axes=(1, 0))          # (bra, s, r_ket)
        env2 = np.tensordot(a, t, axes=([0, 1], [0, 1]))  # (r_bra, r_ket)
    return float(env[0, 0, 0]) / float(env2[0, 0])


# ---------------------------------------------------------------------------
# checkpointing


_CHECKPOINT_VERSION = 1


def _checkpoint_header(mpo, chi, schedule, seed):
    return {
        "n_sites": mpo.n_sites,
        "chi": int(chi),
        "seed": int(seed),
        "gamma_start": float(schedule.gamma_start),
        "gamma_target": float(schedule.gamma_target),
        "n_steps": int(schedule.n_steps),
        "interpolation": schedule.interpolation,
    }


def save_checkpoint(path, mps, mpo, chi, schedule, seed, stage):
    """Versioned binary snapshot of an annealing run after ``stage``."""
    payload = {
        "version": np.int64(_CHECKPOINT_VERSION),
        "n_sites": np.int64(mpo.n_sites),
        "chi": np.int64(chi),
        "seed": np.int64(seed),
        "gamma_field": np.float64(mpo.gamma_field),
        "gamma_start": np.float64(schedule.gamma_start),
        "gamma_target": np.float64(schedule.gamma_target),
        "n_steps": np.int64(schedule.n_steps),
        "interpolation": np.str_(schedule.interpolation),
        "stage": np.int64(stage),
        "center": np.int64(mps.center),
        "stage_energies": np.asarray(
            mps.diagnostics.get("stage_energies", []), dtype=np.float64
        ),
    }
    for i, t in enumerate(mps.tensors):
        payload[f"tensor_{i}"] = t
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`."""
    try:
        with np.load(path) as data:
            version = int(data["version"])
            if version != _CHECKPOINT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            n = int(data["n_sites"])
            tensors = [data[f"tensor_{i}"] for i in range(n)]
            mps = MatrixProductState(tensors, center=int(data["center"]))
            mps.diagnostics["stage_energies"] = list(data["stage_energies"])
            return {
                "mps": mps,
                "stage": int(data["stage"]),
                "n_sites": n,
                "chi": int(data["chi"]),
                "seed": int(data["seed"]),
                "gamma_field": float(data["gamma_field"]),
                "gamma_start": float(data["gamma_start"]),
                "gamma_target": float(data["gamma_target"]),
                "n_steps": int(data["n_steps"]),
                "interpolation": str(data["interpolation"]),
            }
    except CheckpointError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
