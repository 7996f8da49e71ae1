"""Replica-symmetric mean-field theory of noisy-coupling ground-state inference.

Fully connected counterpart of the ladder pipeline.  Couplings are
Gaussian with mean j0/N; the clean system has variance sigma^2/N and the
degraded one (sigma^2 + gamma_noise^2)/N.  The clean system is treated
classically at inverse temperature beta0; the degraded one carries a
transverse field gamma_field and is treated in the static approximation
at inverse temperature beta.  Both are handled with replica symmetry.

Order parameters:
    clean system:  m0 (magnetization), q0 (Edwards-Anderson overlap)
    noisy system:  m, q (inter-replica overlap), r (same-replica overlap)

Effective fields, with z, y standard Gaussian integration variables:
    Phi0 = sqrt(sigma^2 beta0^2 q0) z + j0 beta0 m0
    Phi  = sqrt(A beta^2 q) z + j0 beta m + sqrt(A beta^2 (r - q)) y
    Psi  = sqrt(beta^2 gamma_field^2 + Phi^2),      A = sigma^2 + gamma_noise^2

All Gaussian integrals run over fixed Gauss-Hermite grids; hyperbolic
weights are combined in log space so beta of order 30 (used as the
zero-temperature proxy) stays overflow-free.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import erf, roots_hermitenorm

from .errors import DomainError, NumericsError, UnconvergedInputError
from .overlap import GammaOptResult
from ._peaks import quadratic_peak

__all__ = [
    "BranchChoice",
    "MeanFieldParams",
    "MeanFieldPoint",
    "NoisySolution",
    "OriginalSolution",
    "QuadratureSpec",
    "find_gamma_opt_mf",
    "free_energy",
    "overlap_mf",
    "solve_noisy",
    "solve_noisy_selected",
    "solve_original",
    "sweep_field_mf",
]

_LN2 = np.log(2.0)
_PSI_FLOOR = 1e-7          # below this the r-integrand is 1 + O(Psi^2)
_SIGN_RANGE = 13.6         # erf saturates to +-1 in double precision well inside


@dataclass(frozen=True)
class MeanFieldParams:
    sigma: float
    gamma_noise: float
    j0: float = 1.0
    beta0: float = 30.0
    beta: float = 30.0

    def __post_init__(self):
        if self.sigma < 0 or self.gamma_noise < 0:
            raise DomainError("sigma and gamma_noise must be >= 0")
        if self.beta0 <= 0 or self.beta <= 0:
            raise DomainError("beta0 and beta must be > 0")

    @property
    def noise_variance_total(self) -> float:
        return self.sigma ** 2 + self.gamma_noise ** 2


@lru_cache(maxsize=32)
def _gauss_nodes(n: int):
    """Gauss-Hermite nodes for a unit Gaussian weight, exactly symmetric.

    The computed nodes are symmetric only to rounding; the explicit
    (anti)symmetrization makes odd integrands cancel to machine
    precision, which keeps m identically zero when j0 = 0.
    """
    x, w = roots_hermitenorm(n)
    z = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    wz = w / np.sqrt(2.0 * np.pi)
    with np.errstate(divide="ignore"):
        logwz = np.log(wz)   # extreme weights underflow to 0 -> -inf, harmless
    return z, wz, logwz


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for the nested Gaussian integrals.

    The outer default is generous: at beta of order 30 the outer
    integrands develop near-steps whose width is comparable to the node
    spacing of small grids, and order parameters can then be off by tens
    of percent.  The inner integrand lives mostly in its exponential
    tails and converges much earlier.
    """

    n_nodes_outer: int = 384
    n_nodes_inner: int = 96
    log_space: bool = True

    def __post_init__(self):
        if self.n_nodes_outer < 2 or self.n_nodes_inner < 2:
            raise DomainError("need at least 2 quadrature nodes")

    def outer(self):
        return _gauss_nodes(self.n_nodes_outer)

    def inner(self):
        return _gauss_nodes(self.n_nodes_inner)

    def scaled(self, beta: float) -> "QuadratureSpec":
        """Denser grid for stiff (large beta) kernels."""
        if beta <= 30.0:
            return self
        return replace(self, n_nodes_outer=2 * self.n_nodes_outer,
                       n_nodes_inner=2 * self.n_nodes_inner)


def _default_quad(params: MeanFieldParams, quad):
    if quad is not None:
        return quad
    return QuadratureSpec().scaled(max(params.beta, params.beta0))


def _logcosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - _LN2


def _logsinh(x):
    # x >= 0; returns -inf at 0, which the callers mask or tolerate
    with np.errstate(divide="ignore"):
        return x + np.log1p(-np.exp(-2.0 * x)) - _LN2


@dataclass(frozen=True)
class OriginalSolution:
    m0: float
    q0: float
    residual: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class NoisySolution:
    m: float
    q: float
    r: float
    residual: float
    iterations: int
    converged: bool
    n_projections: int = 0
    replicon: float = float("nan")   # RS locally stable where <= 1


def solve_original(
    params: MeanFieldParams,
    quad: QuadratureSpec | None = None,
    tol: float = 1e-10,
    max_iter: int = 5000,
    damping: float = 0.5,
    init: tuple = (0.9, 0.9),
) -> OriginalSolution:
    """Self-consistent (m0, q0) of the clean classical system.

        m0 = int Dz tanh(Phi0),   q0 = int Dz tanh^2(Phi0)

    solved by damped fixed-point iteration on the quadrature grid, so the
    reported residual is that of the discretized equations.

    The q0 update uses the Gaussian-moment form 1 - <z tanh>/(sigma b0
    sqrt(q0)), equal to <tanh^2> in the continuum.  On a finite grid the
    two differ by the quadrature's integration-by-parts defect, and only
    the moment form is the exact gradient of ``free_energy`` evaluated
    with the same nodes; stationarity then holds at any node count.
    """
    quad = _default_quad(params, quad)
    z, wz, _ = quad.outer()
    b0, j0, s = params.beta0, params.j0, params.sigma
    m0, q0 = float(init[0]), float(init[1])
    residual = np.inf
    for it in range(1, max_iter + 1):
        q0 = max(q0, 0.0)
        u = s * b0 * np.sqrt(q0)
        phi0 = u * z + j0 * b0 * m0
        t = np.tanh(phi0)
        m0_new = float(wz @ t)
        if u > 1e-8:
            q0_new = 1.0 - float(wz @ (z * t)) / u
        else:
            # no z-dependence left; the defect vanishes with it
            q0_new = float(wz @ (t * t))
        residual = max(abs(m0_new - m0), abs(q0_new - q0))
        m0 += damping * (m0_new - m0)
        q0 += damping * (q0_new - q0)
        if residual < tol:
            return OriginalSolution(m0, q0, residual, it, True)
    return OriginalSolution(m0, q0, residual, max_iter, False)


def _noisy_ratios(params, gamma_field, m, q, r, quad):
    """Per-z ratios (m-weight, r-weight) of the inner y integrals.

    Returns (ratio_m, ratio_r, log_denominator) as arrays over the outer
    grid; |ratio_m| <= 1 and 0 <= ratio_r <= 1 hold analytically, so the
    exponentials cannot overflow.
    """
    if r < q - 1e-12:
        raise DomainError(f"need r >= q, got r={r}, q={q}")
    beta, j0 = params.beta, params.j0
    a_tot = params.noise_variance_total
    z, _, _ = quad.outer()
    y, wy, logwy = quad.inner()
    cz = np.sqrt(a_tot * beta * beta * max(q, 0.0))
    cy = np.sqrt(a_tot * beta * beta * max(r - q, 0.0))
    bg = beta * gamma_field
    phi = cz * z[:, None] + j0 * beta * m + cy * y[None, :]
    psi = np.hypot(bg, phi)

    if not quad.log_space:
        # direct evaluation; only safe for modest beta (tests use it as a
        # cross-check of the log-space path)
        cosh_psi = np.cosh(psi)
        small = psi < _PSI_FLOOR
        safe = np.where(small, 1.0, psi)
        sinhc = np.where(small, 1.0, np.sinh(safe) / safe)
        num_m = (phi * sinhc) @ wy
        r_int = np.where(
            small, 1.0,
            (phi / safe) ** 2 * cosh_psi + (bg * bg / safe ** 3) * np.sinh(safe),
        )
        num_r = r_int @ wy
        den = cosh_psi @ wy
        return num_m / den, num_r / den, np.log(den)

    log_cosh = _logcosh(psi)
    log_den = _logsumexp(log_cosh + logwy, axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs_phi = np.log(np.abs(phi))
        log_psi = np.log(psi)
        log_sinh = _logsinh(psi)
        # m-weight (Phi/Psi) sinh(Psi); -> Phi as Psi -> 0
        lm = np.where(psi < _PSI_FLOOR, log_abs_phi,
                      log_abs_phi - log_psi + log_sinh)
        # r-weight (Phi/Psi)^2 cosh(Psi) + (beta g)^2 sinh(Psi)/Psi^3; -> 1
        p1 = 2.0 * (log_abs_phi - log_psi) + log_cosh
        if bg > 0.0:
            p2 = 2.0 * np.log(bg) - 3.0 * log_psi + log_sinh
            lr = np.logaddexp(p1, p2)
        else:
            lr = p1
        lr = np.where(psi < _PSI_FLOOR, 0.0, lr)
        lm = np.where(np.isnan(lm), -np.inf, lm)
        lr = np.where(np.isnan(lr), -np.inf, lr)

    sign_m = np.sign(phi)
    num_m, sgn = _signed_logsumexp(lm + logwy, sign_m, axis=1)
    ratio_m = sgn * np.exp(num_m - log_den)
    num_r = _logsumexp(lr + logwy, axis=1)
    ratio_r = np.exp(num_r - log_den)
    return ratio_m, ratio_r, log_den


def _logsumexp(a, axis):
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax), axis=axis)) + np.squeeze(amax, axis=axis)
    return out


def _signed_logsumexp(a, signs, axis):
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    s = np.sum(signs * np.exp(a - amax), axis=axis)
    with np.errstate(divide="ignore"):
        out = np.log(np.abs(s)) + np.squeeze(amax, axis=axis)
    return out, np.sign(s)


def solve_noisy(
    params: MeanFieldParams,
    gamma_field: float,
    quad: QuadratureSpec | None = None,
    tol: float = 1e-8,
    max_iter: int = 4000,
    damping: float = 0.5,
    init: tuple = (0.9, 0.9, 0.95),
) -> NoisySolution:
    """Self-consistent (m, q, r) of the degraded transverse-field system.

    Damped fixed-point iteration; whenever an update would violate
    r >= q, r is lifted to q (counted in ``n_projections``, a symptom of
    leaving the replica-symmetric region rather than an error).

    As in ``solve_original``, the q update uses the moment form
    r_rhs - <z ratio_m>/c_z (c_z the conditioning-field scale), which is
    the exact grid gradient of ``free_energy``; it reduces to
    <ratio_m^2> in the continuum via d(ratio_m)/dz = c_z (ratio_r -
    ratio_m^2).

    The returned ``replicon`` value is the local stability measure of
    the replica-symmetric saddle,

        A beta^2 int Dz (d<tau^z>/d(local field))^2,

    where the susceptibility is ratio_r - ratio_m^2 per site; values
    above 1 mean the solution sits in the broken-symmetry region (the
    classical limit of this expression is the usual sech^4 criterion).
    """
    if gamma_field < 0:
        raise DomainError(f"gamma_field must be >= 0, got {gamma_field}")
    quad = _default_quad(params, quad)
    z, wz, _ = quad.outer()
    beta_cz = params.beta * np.sqrt(params.noise_variance_total)
    m, q, r = (float(v) for v in init)
    residual = np.inf
    projections = 0
    converged = False
    for it in range(1, max_iter + 1):
        ratio_m, ratio_r, _ = _noisy_ratios(params, gamma_field, m, q, r, quad)
        m_new = float(wz @ ratio_m)
        r_new = float(wz @ ratio_r)
        cz = beta_cz * np.sqrt(max(q, 0.0))
        if cz > 1e-8:
            q_new = r_new - float(wz @ (z * ratio_m)) / cz
        else:
            q_new = float(wz @ (ratio_m * ratio_m))
        if r_new < q_new:
            r_new = q_new + 1e-12
            projections += 1
        residual = max(abs(m_new - m), abs(q_new - q), abs(r_new - r))
        m += damping * (m_new - m)
        q += damping * (q_new - q)
        r += damping * (r_new - r)
        if r < q:
            r = q + 1e-12
        if residual < tol:
            converged = True
            break
    if -1e-7 < q < 0.0:
        q = 0.0   # stop-tolerance remnant in the symmetric phase
    suscept = ratio_r - ratio_m * ratio_m
    replicon = params.noise_variance_total * params.beta ** 2 \
        * float(wz @ (suscept * suscept))
    return NoisySolution(m, q, r, residual, it, converged, projections, replicon)


def free_energy(
    params: MeanFieldParams,
    gamma_field: float,
    m0: float,
    q0: float,
    m: float,
    q: float,
    r: float,
    quad: QuadratureSpec | None = None,
) -> float:
    """Variational functional (negative free energy per spin, times beta).

    Stationary in all five order parameters exactly at the solutions of
    the self-consistent equations.  Evaluated with the same quadrature
    grids as the solvers so that stationarity carries over to the
    discretized problem.
    """
    quad = _default_quad(params, quad)
    z, wz, _ = quad.outer()
    b0, b, j0, s = params.beta0, params.beta, params.j0, params.sigma
    a_tot = params.noise_variance_total

    phi0 = s * b0 * np.sqrt(max(q0, 0.0)) * z + j0 * b0 * m0
    clean = (
        0.25 * s * s * b0 * b0 * (q0 * q0 + 1.0)
        - 0.5 * s * s * b0 * b0 * q0
        - 0.5 * j0 * b0 * m0 * m0
        + float(wz @ (_LN2 + _logcosh(phi0)))
    )

    _, _, log_den = _noisy_ratios(params, gamma_field, m, q, r, quad)
    noisy = (
        0.25 * a_tot * b * b * (q * q - r * r)
        - 0.5 * j0 * b * m * m
        + float(wz @ (_LN2 + log_den))
    )
    total = clean + noisy
    if not np.isfinite(total):
        raise NumericsError(f"free energy evaluated non-finite: {total}")
    return float(total)


# ---------------------------------------------------------------------------
# overlap between the clean ground state and the inferred configuration


def _inner_sign(params, gamma_field, m, q, r, quad, z_value: float) -> float:
    """Sign of int Dy (Phi/Psi^2) sinh(Psi) at fixed outer variable."""
    beta, j0 = params.beta, params.j0
    a_tot = params.noise_variance_total
    y, wy, logwy = quad.inner()
    cz = np.sqrt(a_tot * beta * beta * max(q, 0.0))
    cy = np.sqrt(a_tot * beta * beta * max(r - q, 0.0))
    bg = beta * gamma_field
    phi = cz * z_value + j0 * beta * m + cy * y
    psi = np.hypot(bg, phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.where(
            psi < _PSI_FLOOR,
            np.log(np.abs(phi)),
            np.log(np.abs(phi)) - 2.0 * np.log(psi) + _logsinh(psi),
        )
        lw = np.where(np.isnan(lw), -np.inf, lw)
    a = lw + logwy
    amax = np.max(a)
    if not np.isfinite(amax):
        return 0.0
    return float(np.sign(np.sum(np.sign(phi) * np.exp(a - amax))))


def overlap_mf(
    params: MeanFieldParams,
    gamma_field: float,
    original: OriginalSolution,
    noisy: NoisySolution,
    quad: QuadratureSpec | None = None,
    m_floor: float = 1e-5,
) -> float:
    """Mean overlap between the clean ground state and the inferred spins.

    Both factors are Gaussian averages of a sign and reduce to error
    functions; the inner sign changes at a single root, located by
    bisection on the log-space integrand.

    In the symmetric sector (m = 0) the second factor vanishes exactly;
    a solved |m| below ``m_floor`` is iteration remainder rather than
    magnetic order (the sign integral would otherwise divide one
    remainder by another), so the overlap is reported as 0.
    """
    if not original.converged:
        raise UnconvergedInputError("original-system solution did not converge")
    if not noisy.converged:
        raise UnconvergedInputError("noisy-system solution did not converge")
    quad = _default_quad(params, quad)
    s, j0 = params.sigma, params.j0

    scale0 = s * np.sqrt(max(original.q0, 0.0))
    if scale0 == 0.0:
        factor1 = float(np.sign(j0 * original.m0))
    else:
        factor1 = float(erf(j0 * original.m0 / (np.sqrt(2.0) * scale0)))

    if abs(noisy.m) < m_floor:
        return 0.0

    m, q, r = noisy.m, noisy.q, noisy.r
    lo, hi = -_SIGN_RANGE, _SIGN_RANGE
    s_lo = _inner_sign(params, gamma_field, m, q, r, quad, lo)
    s_hi = _inner_sign(params, gamma_field, m, q, r, quad, hi)
    if s_lo == s_hi:
        factor2 = s_hi
    elif s_lo == 0.0 or s_hi == 0.0:
        factor2 = s_lo + s_hi  # one-sided degeneracy; keep the defined sign
    else:
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            s_mid = _inner_sign(params, gamma_field, m, q, r, quad, mid)
            if s_mid == s_lo:
                lo = mid
            else:
                hi = mid
        z_star = 0.5 * (lo + hi)
        factor2 = float(-s_hi * erf(z_star / np.sqrt(2.0)))
    return factor1 * factor2


# ---------------------------------------------------------------------------
# field sweeps


@dataclass(frozen=True)
class MeanFieldPoint:
    gamma_field: float
    m0: float
    q0: float
    m: float
    q: float
    r: float
    overlap: float
    residual: float
    iterations: int
    converged: bool
    replicon: float
    rsb_warning: bool


_FERRO_INIT = (0.9, 0.9, 0.95)
_SYMMETRIC_INIT = (0.0, 0.8, 0.85)   # m = 0 is preserved by the iteration
_M_ORDER_FLOOR = 1e-5


class BranchChoice(NamedTuple):
    solution: "NoisySolution"
    functional: float        # -[f] of the chosen candidate
    magnetized: tuple | None  # (m, q, r) of the magnetized candidate, if any


def solve_noisy_selected(
    params: MeanFieldParams,
    gamma_field: float,
    quad: QuadratureSpec | None = None,
    tol: float = 1e-8,
    max_iter: int = 4000,
    original: OriginalSolution | None = None,
    warm: tuple | None = None,
) -> BranchChoice:
    """Thermodynamic branch among the coexisting fixed points.

    The equations can hold a magnetized and a symmetric (m = 0)
    solution at the same field.  This solves from a magnetized cold
    start, from ``warm`` when given, and from a symmetric start, then
    keeps the converged candidate with the largest variational value
    (lowest free energy); the magnetized candidate wins ties.  The
    symmetric start carries q > 0 so the glassy m = 0 solution is found
    where it exists; its iteration drains q to zero on its own where
    only the trivial paramagnet remains.
    """
    quad = _default_quad(params, quad)
    if original is None:
        original = solve_original(params, quad)
    inits = [_FERRO_INIT]
    if warm is not None and abs(warm[0]) >= _M_ORDER_FLOOR:
        inits.append(tuple(warm))
    inits.append(_SYMMETRIC_INIT)

    best = None
    best_f = -np.inf
    magnetized = None
    for init in inits:
        sol = solve_noisy(params, gamma_field, quad, tol=tol,
                          max_iter=max_iter, init=init)
        if not sol.converged:
            continue
        fval = free_energy(params, gamma_field, original.m0, original.q0,
                           sol.m, sol.q, sol.r, quad)
        if abs(sol.m) >= _M_ORDER_FLOOR:
            if magnetized is None or fval > magnetized[0]:
                magnetized = (fval, (sol.m, sol.q, sol.r))
        if fval > best_f:
            best, best_f = sol, fval
    if best is None:
        # keep the last attempt so callers see the failure diagnostics
        return BranchChoice(sol, float("nan"),
                            magnetized[1] if magnetized else None)
    return BranchChoice(best, best_f, magnetized[1] if magnetized else None)


def sweep_field_mf(
    params: MeanFieldParams,
    field_grid,
    quad: QuadratureSpec | None = None,
    tol: float = 1e-8,
    max_iter: int = 4000,
) -> tuple[list[MeanFieldPoint], OriginalSolution]:
    """Solve the noisy system across ``field_grid`` and attach overlaps.

    Fields are processed in ascending order.  At each point the
    symmetric and magnetized fixed points are both solved and the lower
    free energy wins (``solve_noisy_selected``); the magnetized
    candidate of the previous field seeds the next so the branch is
    followed through fold points even where it is not selected.
    Every field at or below the largest field whose selected solution is
    replicon-unstable (or needed an r >= q projection) is marked with
    ``rsb_warning``: replica symmetry is unreliable there.
    """
    grid = [float(g) for g in field_grid]
    if not grid:
        raise DomainError("field_grid must not be empty")
    if any(g < 0 for g in grid):
        raise DomainError("field_grid entries must be >= 0")
    order = np.argsort(grid)
    quad = _default_quad(params, quad)
    original = solve_original(params, quad)

    raw = {}
    warm = None
    for idx in order:
        g = grid[idx]
        choice = solve_noisy_selected(params, g, quad, tol=tol,
                                      max_iter=max_iter, original=original,
                                      warm=warm)
        sol = choice.solution
        warm = choice.magnetized
        if sol.converged and original.converged:
            mval = overlap_mf(params, g, original, sol, quad)
        else:
            mval = float("nan")
        raw[idx] = (g, sol, mval)

    unstable = [g for g, sol, _ in raw.values()
                if sol.n_projections > 0 or sol.replicon > 1.0]
    rsb_edge = max(unstable) if unstable else -np.inf
    points = []
    for idx in range(len(grid)):
        g, sol, mval = raw[idx]
        points.append(MeanFieldPoint(
            gamma_field=g, m0=original.m0, q0=original.q0,
            m=sol.m, q=sol.q, r=sol.r, overlap=mval,
            residual=sol.residual, iterations=sol.iterations,
            converged=sol.converged, replicon=sol.replicon,
            rsb_warning=g <= rsb_edge,
        ))
    return points, original


_DEFAULT_OPT_GRID = tuple(np.round(np.concatenate([
    np.arange(0.0, 0.2005, 0.01),
    np.arange(0.225, 0.5, 0.025),
    np.arange(0.5, 2.0001, 0.05),
]), 10))


def find_gamma_opt_mf(
    params: MeanFieldParams,
    field_grid=None,
    quad: QuadratureSpec | None = None,
) -> GammaOptResult:
    """Field value maximizing the mean-field overlap.

    The default grid is dense at small fields, where the optimum sits
    when the noise is weak.  Non-converged points are excluded; the
    discrete maximum is parabola-refined when interior.
    """
    grid = _DEFAULT_OPT_GRID if field_grid is None else tuple(field_grid)
    points, _ = sweep_field_mf(params, grid, quad)
    usable = [(p.gamma_field, p.overlap) for p in points
              if p.converged and np.isfinite(p.overlap)]
    if len(usable) < 2:
        raise UnconvergedInputError(
            "fewer than 2 converged sweep points; cannot locate a maximum"
        )
    x = np.array([u[0] for u in usable])
    y = np.array([u[1] for u in usable])
    gx, gy, boundary = quadratic_peak(x, y)
    return GammaOptResult(gamma_opt=gx, m_max=gy, at_boundary=boundary)
