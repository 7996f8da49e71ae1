"""End-to-end checks of the suite's headline guarantees.

Each test covers one stated guarantee and prints a single PASS/FAIL
summary line (run ``pytest -s`` to see the lines for passing tests
too).  The two 300-realization ladder sweeps dominate the runtime; the
whole module takes roughly an hour on one core.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import fsolve

from qaglass.disorder import generate_instance
from qaglass.exact import all_magnetizations_z, ground_state_lanczos
from qaglass.ladder import (all_configuration_energies,
                            configuration_from_index, viterbi_ground_state)
from qaglass.meanfield import (MeanFieldParams, QuadratureSpec, free_energy,
                               find_gamma_opt_mf, solve_noisy, sweep_field_mf)
from qaglass.mps import build_mpo, dmrg_ground_state, mps_all_magnetizations
from qaglass.overlap import SweepConfig, find_gamma_opt, run_sweep
from qaglass.cli import main

QUAD = QuadratureSpec(384, 96)


def _report(name, ok, detail):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'}  ({detail})")


# ------------------------------------------------------------ fixtures


@pytest.fixture(scope="module")
def ladder_sweep():
    """Default 16-site sweep: 300 realizations, 21 fields, Lanczos."""
    t0 = time.perf_counter()
    curve, records = run_sweep(SweepConfig(), workers=1)
    print(f"[acceptance] ladder sweep done in {time.perf_counter() - t0:.0f}s")
    return curve, records


@pytest.fixture(scope="module")
def zero_noise_sweep():
    cfg = replace(SweepConfig(), gamma=0.0)
    t0 = time.perf_counter()
    curve, records = run_sweep(cfg, workers=1)
    print(f"[acceptance] clean sweep done in {time.perf_counter() - t0:.0f}s")
    return curve, records


@pytest.fixture(scope="module")
def mf_sweep():
    params = MeanFieldParams(sigma=0.5, gamma_noise=0.75, j0=1.0,
                             beta0=30.0, beta=30.0)
    grid = np.round(np.arange(0.05, 2.0 + 1e-9, 0.075), 10)
    points, original = sweep_field_mf(params, grid, QUAD)
    return params, grid, points, original


# ------------------------------------------- 1: classical ground states


def test_viterbi_matches_brute_force():
    """Transfer-matrix ground state equals enumeration on 500 instances."""
    rng = np.random.default_rng(20260817)
    sizes = rng.integers(8, 21, size=500)
    noise_levels = (0.0, 0.3, 1.0)
    energy_ok = True
    config_ok = True
    worst = 0.0
    n_unique = 0
    for k, n in enumerate(sizes):
        n = int(n)
        inst = generate_instance(n, 1.0, noise_levels[k % 3], 300000 + k)
        energies = all_configuration_energies(inst.j3_noisy, inst.j2_noisy, n)
        config, e_v = viterbi_ground_state(inst.j3_noisy, inst.j2_noisy)
        idx = int(np.argmin(energies))
        err = abs(e_v - energies[idx])
        worst = max(worst, err)
        if err > 1e-12 * (n - 2):
            energy_ok = False
        ties = np.flatnonzero(energies <= energies[idx] + 1e-9)
        if ties.size == 1:
            n_unique += 1
            ref = configuration_from_index(idx, n)
            if not np.array_equal(config.spins, ref.spins):
                config_ok = False
    ok = energy_ok and config_ok
    _report("classical ground-state oracle", ok,
            f"500 instances, {n_unique} unique minima, worst dE={worst:.2e}")
    assert energy_ok
    assert config_ok


# --------------------------------------------- 2: sparse vs dense solver


def _dense_hamiltonian(inst, gamma_field):
    """Full matrix built the pedestrian way: s_i = 1 - 2*bit_i."""
    n = inst.n_sites
    dim = 1 << n
    bits = (np.arange(dim)[:, None] >> np.arange(n)[None, :]) & 1
    s = 1.0 - 2.0 * bits
    diag = np.zeros(dim)
    for i in range(n - 2):
        diag -= inst.j3_noisy[i] * s[:, i] * s[:, i + 1] * s[:, i + 2]
        diag -= inst.j2_noisy[i] * s[:, i] * s[:, i + 2]
    h = np.diag(diag)
    rows = np.arange(dim)
    for i in range(n):
        h[rows, rows ^ (1 << i)] = -gamma_field
    return h, s


def test_lanczos_matches_dense():
    rng = np.random.default_rng(20260818)
    sizes = (6, 7, 8, 9, 10)
    noise_levels = (0.2, 0.5, 1.0)
    worst_de = 0.0
    worst_dmz = 0.0
    min_gap = np.inf
    for k in range(100):
        n = sizes[k % len(sizes)]
        g = float(rng.uniform(0.3, 1.5))
        inst = generate_instance(n, 1.0, noise_levels[k % 3], 400000 + k)
        h, s = _dense_hamiltonian(inst, g)
        w, v = np.linalg.eigh(h)
        min_gap = min(min_gap, w[1] - w[0])
        mz_ref = (v[:, 0] ** 2) @ s
        state, e = ground_state_lanczos(inst, g, tol=1e-10)
        worst_de = max(worst_de, abs(e - w[0]))
        worst_dmz = max(worst_dmz,
                        float(np.max(np.abs(all_magnetizations_z(state)
                                            - mz_ref))))
    ok = worst_de <= 1e-10 and worst_dmz <= 1e-8
    _report("iterative vs dense diagonalization", ok,
            f"100 instances, worst dE={worst_de:.2e}, worst dmz={worst_dmz:.2e},"
            f" min gap={min_gap:.2e}")
    assert worst_de <= 1e-10
    assert worst_dmz <= 1e-8


# --------------------------------------------------- 3: DMRG vs Lanczos


def test_dmrg_matches_lanczos():
    rng = np.random.default_rng(20260819)
    sizes = (8, 10, 12, 14, 16)
    noise_levels = (0.2, 0.5, 1.0)
    worst_de = 0.0
    signs_ok = True
    n_sites_compared = 0
    for k in range(50):
        n = sizes[k % len(sizes)]
        g = float(rng.uniform(0.1, 1.5))
        inst = generate_instance(n, 1.0, noise_levels[k % 3], 500000 + k)
        mps, e_d = dmrg_ground_state(build_mpo(inst, g), chi=64, seed=k)
        state, e_l = ground_state_lanczos(inst, g, tol=1e-10)
        worst_de = max(worst_de, abs(e_d - e_l))
        mz_l = all_magnetizations_z(state)
        mz_d = mps_all_magnetizations(mps)
        big = np.abs(mz_l) > 1e-6
        n_sites_compared += int(big.sum())
        if not np.all(np.sign(mz_d[big]) == np.sign(mz_l[big])):
            signs_ok = False
    ok = worst_de <= 1e-8 and signs_ok
    _report("DMRG vs iterative diagonalization", ok,
            f"50 instances, worst dE={worst_de:.2e}, "
            f"{n_sites_compared} site signs compared")
    assert worst_de <= 1e-8
    assert signs_ok


# ------------------------------------------------- 4: ladder curve peak


def test_ladder_peak_exists(ladder_sweep):
    """Mean overlap rises significantly above its zero-field value."""
    curve, records = ladder_sweep
    cfg = SweepConfig()
    grid = [float(g) for g in cfg.gamma_grid]
    by_real = {}
    for rec in records:
        by_real.setdefault(rec.realization, {})[rec.gamma_field] = rec
    usable = [k for k, recs in by_real.items()
              if len(recs) == len(grid)
              and all(r.status == "ok" for r in recs.values())]
    m0 = np.array([by_real[k][0.0].overlap for k in usable])
    best = None
    found = False
    for g in grid[1:-1]:
        d = np.array([by_real[k][g].overlap for k in usable]) - m0
        mean_d = float(np.mean(d))
        se = float(np.std(d, ddof=1) / np.sqrt(len(d)))
        if mean_d > 2 * se:
            found = True
        if best is None or mean_d - 2 * se > best[1] - 2 * best[2]:
            best = (g, mean_d, se)
    ok = len(usable) >= 300 and found
    _report("ladder overlap peak", ok,
            f"{len(usable)} realizations, best field={best[0]:.1f}, "
            f"gain={best[1]:.4f} +- {best[2]:.4f}")
    assert len(usable) >= 300
    assert found


# ------------------------------------------------- 5: zero-noise sanity


def test_zero_noise_overlap_is_one(zero_noise_sweep):
    curve, _ = zero_noise_sweep
    first = curve.points[0]
    res = find_gamma_opt(curve)
    ok = (first.gamma_field == 0.0 and first.mean_overlap == 1.0
          and res.gamma_opt == 0.0)
    _report("zero-noise sanity", ok,
            f"M(0)={first.mean_overlap}, opt={res.gamma_opt}")
    assert first.gamma_field == 0.0
    assert first.mean_overlap == 1.0
    assert res.gamma_opt == 0.0


# ---------------------------------------- 6: mean-field curve structure


def test_meanfield_curve_interior_maximum(mf_sweep):
    params, grid, points, original = mf_sweep
    n_conv = sum(pt.converged for pt in points)
    overlaps = np.array([pt.overlap for pt in points])
    j = int(np.argmax(overlaps))
    interior = 0 < j < len(points) - 1
    clean = [pt for pt in points if pt.converged and not pt.rsb_warning]
    # symmetric-phase fixed points stop at the tolerance with tiny
    # arbitrary-sign m; floor them like overlap_mf does
    m_vals = [0.0 if abs(pt.m) < 1e-5 else pt.m for pt in clean]
    q_vals = [pt.q for pt in clean]
    m_mono = all(b <= a + 1e-9 for a, b in zip(m_vals, m_vals[1:]))
    q_mono = all(b <= a + 1e-9 for a, b in zip(q_vals, q_vals[1:]))
    ok = (n_conv == len(points) and interior and m_mono and q_mono)
    _report("mean-field overlap curve", ok,
            f"peak M={overlaps[j]:.5f} at field {points[j].gamma_field:g}, "
            f"{n_conv}/{len(points)} converged, m/q monotone: {m_mono}/{q_mono}")
    assert n_conv == len(points)
    assert interior
    assert m_mono
    assert q_mono


# ------------------------------------- 7: optimum vs total noise variance


def test_meanfield_opt_tracks_summed_variance():
    """Optimal field within 25% of sigma^2 + gamma^2 at ten noise points."""
    combos = [(0.0, g) for g in (0.2, 0.4, 0.6, 0.8, 1.0)] \
        + [(0.5, g) for g in (0.2, 0.4, 0.6, 0.8, 1.0)]
    all_ok = True
    lines = []
    for sigma, gamma in combos:
        params = MeanFieldParams(sigma=sigma, gamma_noise=gamma, j0=1.0,
                                 beta0=30.0, beta=30.0)
        res = find_gamma_opt_mf(params, quad=QUAD)
        target = sigma ** 2 + gamma ** 2
        dev = abs(res.gamma_opt - target) / target
        point_ok = dev <= 0.25 and not res.at_boundary
        all_ok = all_ok and point_ok
        lines.append(f"sigma={sigma} gamma={gamma}: opt={res.gamma_opt:.4f} "
                     f"target={target:.4f} dev={dev:.0%}"
                     f"{'' if point_ok else ' <-- off'}")
    for line in lines:
        print(f"[acceptance]   {line}")
    _report("optimal field tracks total noise variance", all_ok,
            f"{sum('off' not in s for s in lines)}/10 points within 25%")
    assert all_ok


# --------------------------------------------- 8: stationarity of points


def _fd_gradient(params, gamma_field, x, quad):
    """Finite-difference gradient of the free energy at (m0,q0,m,q,r).

    Central differences, falling back to one-sided second order where a
    domain wall (q0 >= 0, q >= 0, q <= r) is closer than the step.
    """
    def f(y):
        return free_energy(params, gamma_field, y[0], y[1], y[2], y[3],
                           y[4], quad)

    m0, q0, m, q, r = x
    lo_head = np.array([np.inf, q0, np.inf, q, r - q])
    hi_head = np.array([np.inf, np.inf, np.inf, r - q, np.inf])
    grad = np.empty(5)
    for i in range(5):
        h = min(1e-5, max(lo_head[i], 1e-9) * 0.45,
                max(hi_head[i], 1e-9) * 0.45)
        h = max(h, 1e-9)
        xp = np.array(x, dtype=float)
        xm = np.array(x, dtype=float)
        x2 = np.array(x, dtype=float)
        if lo_head[i] >= h and hi_head[i] >= h:
            xp[i] += h
            xm[i] -= h
            grad[i] = (f(xp) - f(xm)) / (2 * h)
        elif hi_head[i] >= h:
            xp[i] += h
            x2[i] += 2 * h
            grad[i] = (-3 * f(np.asarray(x, dtype=float)) + 4 * f(xp)
                       - f(x2)) / (2 * h)
        else:
            xm[i] -= h
            x2[i] -= 2 * h
            grad[i] = (3 * f(np.asarray(x, dtype=float)) - 4 * f(xm)
                       + f(x2)) / (2 * h)
    return grad


def test_meanfield_stationarity(mf_sweep):
    """Converged points satisfy the equations and sit at functional extrema."""
    params, grid, points, original = mf_sweep
    worst_resid = original.residual
    worst_grad = 0.0
    n_checked = 0
    for pt in points:
        if not pt.converged:
            continue
        worst_resid = max(worst_resid, pt.residual)
        g = _fd_gradient(params, pt.gamma_field,
                         (original.m0, original.q0, pt.m, pt.q, pt.r), QUAD)
        worst_grad = max(worst_grad, float(np.max(np.abs(g))))
        n_checked += 1
    ok = n_checked > 0 and worst_resid < 1e-8 and worst_grad < 1e-4
    _report("mean-field stationarity", ok,
            f"{n_checked} points, worst residual={worst_resid:.2e}, "
            f"worst grad component={worst_grad:.2e}")
    assert n_checked > 0
    assert worst_resid < 1e-8
    assert worst_grad < 1e-4


# ----------------------------------------------- 9: zero-field reduction


def _classical_rs(variance, j0, beta, quad, init=(0.9, 0.9)):
    """Independent replica-symmetric solver for the classical glass.

    Damped fixed-point iteration polished by a root finder, on the same
    quadrature nodes as the package solver.
    """
    z, wz, _ = quad.outer()

    def updates(m, q):
        u = beta * np.sqrt(variance * max(q, 1e-300))
        t = np.tanh(u * z + j0 * beta * m)
        return float(wz @ t), 1.0 - float(wz @ (z * t)) / u

    m, q = init
    for _ in range(30000):
        m_new, q_new = updates(m, q)
        resid = max(abs(m_new - m), abs(q_new - q))
        m += 0.4 * (m_new - m)
        q += 0.4 * (q_new - q)
        if resid < 1e-13:
            break

    def residual(x):
        mu, qu = updates(x[0], x[1])
        return [mu - x[0], qu - x[1]]

    sol, _, ier, msg = fsolve(residual, [m, q], xtol=1e-13, full_output=True)
    assert ier == 1, msg
    assert abs(sol[0] - m) < 1e-9 and abs(sol[1] - q) < 1e-9
    return float(sol[0]), float(sol[1])


def test_zero_field_classical_limit():
    all_ok = True
    details = []
    for sigma, gamma in ((0.5, 0.6), (0.0, 0.8)):
        params = MeanFieldParams(sigma=sigma, gamma_noise=gamma, j0=1.0,
                                 beta0=30.0, beta=30.0)
        sol = solve_noisy(params, 0.0, QUAD, tol=1e-10)
        m_ref, q_ref = _classical_rs(params.noise_variance_total, 1.0,
                                     30.0, QUAD)
        dr = abs(sol.r - 1.0)
        dm = abs(sol.m - m_ref)
        dq = abs(sol.q - q_ref)
        point_ok = sol.converged and dr <= 1e-9 and dm <= 1e-8 and dq <= 1e-8
        all_ok = all_ok and point_ok
        details.append(f"({sigma},{gamma}): |r-1|={dr:.1e} dm={dm:.1e} "
                       f"dq={dq:.1e}")
    _report("zero-field classical reduction", all_ok, "; ".join(details))
    assert all_ok


# -------------------------------------------------- 10: reproducibility


def test_manifest_rerun_byte_identical(tmp_path):
    """Manifest replay with a different worker count rewrites equal CSVs."""
    a, b = tmp_path / "a", tmp_path / "b"
    rc = main(["ladder-sweep", "--n-sites", "6", "--sigma", "1.0",
               "--gamma", "0.4", "--seed", "11", "--grid", "0:0.5:1",
               "--n-realizations", "3", "--solver", "lanczos",
               "--out-dir", str(a)])
    assert rc == 0
    rc = main(["ladder-sweep", "--config", str(a / "sweep_manifest.json"),
               "--out-dir", str(b), "--workers", "2"])
    assert rc == 0
    ladder_same = all(
        (a / f).read_bytes() == (b / f).read_bytes()
        for f in ("sweep_curve.csv", "sweep_realizations.csv"))

    c, d = tmp_path / "c", tmp_path / "d"
    rc = main(["mf-sweep", "--sigma", "0.5", "--gamma", "0.5",
               "--beta0", "8", "--beta", "8", "--field-grid", "0.2:0.4:1.8",
               "--out-dir", str(c)])
    assert rc == 0
    rc = main(["mf-sweep", "--config", str(c / "mf_manifest.json"),
               "--out-dir", str(d), "--workers", "2"])
    assert rc == 0
    mf_same = (c / "mf_curve.csv").read_bytes() == (d / "mf_curve.csv").read_bytes()

    ok = ladder_same and mf_same
    _report("manifest replay determinism", ok,
            f"ladder CSVs equal: {ladder_same}, mean-field CSV equal: {mf_same}")
    assert ladder_same
    assert mf_same
