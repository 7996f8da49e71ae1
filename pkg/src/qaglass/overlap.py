"""Recovery-overlap sweeps over the transverse field.

For each disorder realization the clean couplings define a reference
configuration (exact classical ground state), while the solver only ever
sees the noise-degraded couplings.  The quantum ground state of the
degraded Hamiltonian at field gamma_field is collapsed to a spin
configuration by the sign of the local z magnetization, and the overlap

    M(gamma_field) = (1/N) sum_i S_ref[i] * S_inferred[i]

is averaged over realizations.  The interesting observable is where the
curve peaks: a finite field can undo part of the coupling noise.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._peaks import quadratic_peak
from .disorder import LadderInstance, generate_instance, realization_seed
from .errors import ConvergenceError, DomainError, InsufficientDataError
from .exact import configuration_from_magnetizations, ground_state_lanczos
from .ladder import SpinConfiguration, viterbi_ground_state
from .mps import build_mpo, dmrg_ground_state, dmrg_refine, mps_all_magnetizations

__all__ = [
    "CurvePoint",
    "GammaOptResult",
    "OverlapCurve",
    "RealizationRecord",
    "SweepConfig",
    "aggregate_records",
    "find_gamma_opt",
    "fit_power_law",
    "overlap_single",
    "run_sweep",
]


def overlap_single(reference: SpinConfiguration, inferred: SpinConfiguration) -> float:
    """Site-averaged product of two spin configurations (1 means identical)."""
    if len(reference) != len(inferred):
        raise DomainError(
            f"configurations differ in length: {len(reference)} vs {len(inferred)}"
        )
    return float(np.mean(reference.spins * inferred.spins))


@dataclass(frozen=True)
class SweepConfig:
    """Parameters of one field sweep over many disorder realizations."""

    n_sites: int = 16
    sigma: float = 1.0
    gamma: float = 0.4
    master_seed: int = 20260301
    gamma_grid: tuple = tuple(np.round(np.arange(0.0, 2.0001, 0.1), 10))
    n_realizations: int = 300
    solver: str = "lanczos"
    chi: int = 64
    tol: float = 1e-10

    def __post_init__(self):
        if self.n_realizations < 1:
            raise DomainError(f"n_realizations must be >= 1, got {self.n_realizations}")
        if len(self.gamma_grid) < 1:
            raise DomainError("gamma_grid must not be empty")
        if any(g < 0 for g in self.gamma_grid):
            raise DomainError("gamma_grid entries must be >= 0")
        if len(set(self.gamma_grid)) != len(self.gamma_grid):
            raise DomainError("gamma_grid entries must be distinct")
        if self.solver not in ("lanczos", "dmrg"):
            raise DomainError(f"unknown solver {self.solver!r}")
        if self.sigma < 0 or self.gamma < 0:
            raise DomainError("sigma and gamma must be >= 0")


@dataclass(frozen=True)
class RealizationRecord:
    """Outcome of one (realization, field) solve."""

    realization: int
    gamma_field: float
    overlap: float          # NaN when status != "ok"
    status: str
    n_flagged: int


@dataclass(frozen=True)
class CurvePoint:
    gamma_field: float
    mean_overlap: float
    stderr: float
    n_realizations: int
    flagged_rate: float


@dataclass(frozen=True)
class OverlapCurve:
    points: tuple

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def gamma_fields(self) -> np.ndarray:
        return np.array([p.gamma_field for p in self.points])

    @property
    def mean_overlaps(self) -> np.ndarray:
        return np.array([p.mean_overlap for p in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points])


def _solve_realization(config: SweepConfig, k: int) -> list[RealizationRecord]:
    """All field points for realization ``k``, warm-chained top down.

    The reference configuration comes from the clean couplings; the
    solver only sees the noisy ones.  Fields are visited in descending
    order so each solve starts from the previous solution; a failed
    point is recorded and the chain restarts cold at the next field.
    """
    seed = realization_seed(config.master_seed, k)
    inst = generate_instance(config.n_sites, config.sigma, config.gamma, seed)
    reference, _ = viterbi_ground_state(inst.j3, inst.j2)

    order = np.argsort(config.gamma_grid)[::-1]
    records = {}
    warm = None  # statevector (lanczos) or MPS (dmrg)
    for idx in order:
        g = float(config.gamma_grid[idx])
        try:
            if config.solver == "lanczos":
                v0 = None if warm is None else warm.amplitudes
                state, _ = ground_state_lanczos(inst, g, tol=config.tol, v0=v0)
                warm = state
                mags = _state_mags(state)
            else:
                mpo = build_mpo(inst, g)
                if warm is None:
                    warm, _ = dmrg_ground_state(mpo, chi=config.chi, seed=seed)
                else:
                    dmrg_refine(warm, mpo, chi=config.chi)
                mags = mps_all_magnetizations(warm)
        except ConvergenceError as exc:
            records[idx] = RealizationRecord(k, g, float("nan"),
                                             f"failed:{exc}", 0)
            warm = None
            continue
        inferred, flags = configuration_from_magnetizations(mags)
        m = overlap_single(reference, inferred)
        records[idx] = RealizationRecord(k, g, m, "ok", int(flags.sum()))
    return [records[i] for i in range(len(config.gamma_grid))]


def _state_mags(state) -> np.ndarray:
    from .exact import all_magnetizations_z

    return all_magnetizations_z(state)


def aggregate_records(records, gamma_grid) -> OverlapCurve:
    """Per-field mean and standard error over the successful records."""
    by_gamma: dict[float, list[RealizationRecord]] = {float(g): [] for g in gamma_grid}
    for r in records:
        if r.gamma_field in by_gamma:
            by_gamma[r.gamma_field].append(r)
    points = []
    for g in gamma_grid:
        ok = sorted((r for r in by_gamma[float(g)] if r.status == "ok"),
                    key=lambda r: r.realization)
        if not ok:
            raise InsufficientDataError(
                f"no successful realization at gamma_field={g}"
            )
        vals = np.array([r.overlap for r in ok])
        n = vals.size
        stderr = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        flagged = np.array([r.n_flagged for r in ok])
        points.append(CurvePoint(
            gamma_field=float(g),
            mean_overlap=float(vals.mean()),
            stderr=stderr,
            n_realizations=n,
            flagged_rate=float((flagged > 0).mean()),
        ))
    return OverlapCurve(points=tuple(points))


def run_sweep(
    config: SweepConfig,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
    precomputed: dict[int, list[RealizationRecord]] | None = None,
    on_result: Callable[[int, list[RealizationRecord]], None] | None = None,
) -> tuple[OverlapCurve, list[RealizationRecord]]:
    """Overlap curve for ``config``; returns the curve and all records.

    Each realization is fully determined by (master_seed, index), so the
    result is independent of ``workers``; records come back sorted by
    realization index then grid position.

    ``precomputed`` maps realization indices to their records from an
    earlier partial run; those realizations are not solved again.
    ``on_result`` is called with each freshly solved realization as it
    completes (in completion order, which under workers > 1 need not be
    index order), so callers can persist progress incrementally.
    """
    ks = list(range(config.n_realizations))
    results: dict[int, list[RealizationRecord]] = dict(precomputed or {})
    todo = [k for k in ks if k not in results]

    def record(k, recs, done):
        results[k] = recs
        if on_result is not None:
            on_result(k, recs)
        if progress is not None:
            progress(done, len(todo))

    if workers <= 1:
        for i, k in enumerate(todo):
            record(k, _solve_realization(config, k), i + 1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_solve_realization, config, k): k for k in todo}
            from concurrent.futures import as_completed

            for done, fut in enumerate(as_completed(futures), start=1):
                record(futures[fut], fut.result(), done)
    all_records = [rec for k in ks for rec in results[k]]
    curve = aggregate_records(all_records, config.gamma_grid)
    return curve, all_records


class GammaOptResult(NamedTuple):
    gamma_opt: float
    m_max: float
    at_boundary: bool


def find_gamma_opt(curve: OverlapCurve) -> GammaOptResult:
    """Location of the overlap maximum, parabola-refined when interior."""
    if len(curve) < 2:
        raise InsufficientDataError("need at least 2 curve points")
    x, y, boundary = quadratic_peak(curve.gamma_fields, curve.mean_overlaps)
    return GammaOptResult(gamma_opt=x, m_max=y, at_boundary=boundary)


def fit_power_law(x, y) -> tuple[float, float, float]:
    """Least-squares fit of y = a * x**b in log space.

    Only strictly positive pairs participate.  Returns (a, b, rms log
    residual); raises DomainError with fewer than two usable points.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("need matching 1-d arrays")
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        raise DomainError("need at least 2 positive (x, y) pairs for a power law")
    lx, ly = np.log(x[mask]), np.log(y[mask])
    coeffs, res, *_ = np.linalg.lstsq(
        np.column_stack([np.ones(lx.size), lx]), ly, rcond=None
    )
    fitted = coeffs[0] + coeffs[1] * lx
    rms = float(np.sqrt(np.mean((ly - fitted) ** 2)))
    return float(np.exp(coeffs[0])), float(coeffs[1]), rms
