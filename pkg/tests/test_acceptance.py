"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report.
"""

import time

import numpy as np
import pytest

from stokoop import (
    BatchedSnapshotSet,
    CircleMapConfig,
    ConcentrationInputs,
    ForecastBoundInputs,
    RegularizationPolicy,
    VdpConfig,
    assemble_batched,
    assemble_unbatched,
    circle_alpha,
    circle_reference_matrices,
    concentration_bounds,
    deltas_from_reference,
    dictionary_constants,
    estimate_upsilon,
    estimation_error,
    evaluate_residuals,
    forecast_error_bound,
    fourier_dictionary,
    generate_circle_batched,
    generate_circle_iid,
    integrated_variance,
    iterate,
    koopman_matrix,
    laplacian_rbf_dictionary,
    pick_centers,
    pseudospectrum,
    rectangle_grid,
    residual_report,
    solve_eigenpairs,
    subspace_error,
    vdp_batched_from_trajectory,
    vdp_lattice,
)


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# Criterion 1: circle-map pseudospectra vs the analytic oracle
# ---------------------------------------------------------------------------


def test_circle_pseudospectra_analytic_oracle():
    t0 = time.perf_counter()
    cfg = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5, seed=101)
    data = generate_circle_batched(cfg, 128, 5000)
    mats = assemble_batched(data, fourier_dictionary(10))
    grid = rectangle_grid([-1.2, 1.2], [-1.2, 1.2], [41, 41])

    ps_res = pseudospectrum(grid, mats, 0.3, kind="residual", threads=1)
    ps_var = pseudospectrum(grid, mats, 0.3, kind="variance_residual", threads=1)
    elapsed = time.perf_counter() - t0

    alphas = np.array([circle_alpha(j, cfg) for j in range(-10, 11)])
    z = grid.points[:, None]
    oracle_res = np.min(np.abs(z - alphas), axis=1)
    oracle_var = np.sqrt(
        np.min(np.abs(z - alphas) ** 2 + (1 - np.abs(alphas) ** 2), axis=1)
    )
    err_res = float(np.max(np.abs(ps_res.values - oracle_res)))
    err_var = float(np.max(np.abs(ps_var.values - oracle_var)))

    ok = err_res <= 0.05 and err_var <= 0.05 and elapsed < 120.0
    _report(
        "circle pseudospectra oracle",
        ok,
        f"max err residual={err_res:.4f}, variance={err_var:.4f} "
        f"(tol 0.05), runtime {elapsed:.1f}s (limit 120s)",
    )


# ---------------------------------------------------------------------------
# Criterion 2: Monte Carlo convergence rate of the estimators
# ---------------------------------------------------------------------------


def test_monte_carlo_rate():
    cfg0 = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5)
    n = 2
    ref = circle_reference_matrices(cfg0, n)
    d = fourier_dictionary(n)
    m2_values = [100, 1000, 10000]
    seeds = range(5)
    errs = {"A": [], "L": [], "H": []}
    g_err_max = 0.0
    for m2 in m2_values:
        acc = {"A": 0.0, "L": 0.0, "H": 0.0}
        for s in seeds:
            cfg = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5, seed=200 + s)
            est = assemble_batched(generate_circle_batched(cfg, 64, m2), d)
            e = estimation_error(est, ref)
            g_err_max = max(g_err_max, e["G"])
            for k in acc:
                acc[k] += e[k]
        for k in acc:
            errs[k].append(acc[k] / len(list(seeds)))

    slopes = {
        k: float(np.polyfit(np.log10(m2_values), np.log10(errs[k]), 1)[0])
        for k in errs
    }
    slope_ok = all(-0.65 <= s <= -0.35 for s in slopes.values())
    ok = slope_ok and g_err_max <= 1e-12
    _report(
        "Monte Carlo rate",
        ok,
        f"slopes A={slopes['A']:.3f} L={slopes['L']:.3f} H={slopes['H']:.3f} "
        f"(window [-0.65,-0.35]); max |G err| = {g_err_max:.2e} (tol 1e-12)",
    )


# ---------------------------------------------------------------------------
# Criterion 3: algebraic identities of the residual decomposition
# ---------------------------------------------------------------------------


def test_algebraic_identities():
    cfg = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5, seed=301)
    mats = assemble_batched(generate_circle_batched(cfg, 32, 64), fourier_dictionary(3))
    rng = np.random.default_rng(302)
    worst = 0.0
    for _ in range(100):
        g = rng.normal(size=7) + 1j * rng.normal(size=7)
        lam = complex(rng.normal(scale=0.8), rng.normal(scale=0.8))
        rep = residual_report(lam, g, mats)
        direct = integrated_variance(g, mats)
        scale = max(1.0, rep.res_var_sq, abs(direct))
        worst = max(worst, abs((rep.res_var_sq - rep.res_sq) - direct) / scale)
    identity_ok = worst <= 1e-12

    # deterministic system: duplicated realizations force res == res_var exactly
    vdp = VdpConfig(mu=0.5, delta=0.0, em_step=3e-3, koopman_dt=0.3,
                    burn_in=20_000, seed=303)
    det_data = vdp_batched_from_trajectory(vdp, 400)
    assert np.array_equal(det_data.realizations[0], det_data.realizations[1])
    centers = pick_centers(det_data.states_x, 20, seed=304)
    det_mats = assemble_batched(det_data, laplacian_rbf_dictionary(centers))
    pairs = evaluate_residuals(
        solve_eigenpairs(det_mats, RegularizationPolicy(1e-10)), det_mats
    )
    det_ok = all(p.res == p.res_var for p in pairs) and all(
        p.integrated_variance == 0.0 for p in pairs
    )
    ok = identity_ok and det_ok
    _report(
        "algebraic identities",
        ok,
        f"max relative identity defect {worst:.2e} (tol 1e-12); "
        f"deterministic res == res_var exactly: {det_ok}",
    )


# ---------------------------------------------------------------------------
# Criterion 4: Van der Pol eigenvalue lattice at desk scale
# ---------------------------------------------------------------------------


def test_vdp_lattice_desk_scale():
    t0 = time.perf_counter()
    cfg = VdpConfig(mu=0.5, delta=0.02, em_step=3e-3, koopman_dt=0.3, seed=42)
    data = vdp_batched_from_trajectory(cfg, 200_000)
    centers = pick_centers(data.states_x, 120, seed=5)
    mats = assemble_batched(data, laplacian_rbf_dictionary(centers))
    pairs = evaluate_residuals(solve_eigenpairs(mats), mats)
    lam = np.array([p.eigenvalue for p in pairs])
    elapsed = time.perf_counter() - t0

    dists, rvs, rss = [], [], []
    for k in range(4):
        target = vdp_lattice(0, k, cfg.mu, cfg.koopman_dt)
        i = int(np.argmin(np.abs(lam - target)))
        dists.append(abs(lam[i] - target))
        rvs.append(pairs[i].res_var)
        rss.append(pairs[i].res)
    location_ok = all(dd <= 0.05 for dd in dists)
    trend_ok = all(rvs[i] <= rvs[i + 1] for i in range(3))
    trivial_ok = rvs[0] <= 0.05
    res_ok = all(r <= 0.05 for r in rss)
    ok = location_ok and trend_ok and trivial_ok and res_ok and elapsed <= 600.0
    _report(
        "Van der Pol lattice",
        ok,
        f"lattice distances k=0..3: {['%.4f' % dd for dd in dists]} (tol 0.05); "
        f"res_var {['%.4f' % r for r in rvs]} nondecreasing={trend_ok}; "
        f"res {['%.4f' % r for r in rss]} (tol 0.05); "
        f"runtime {elapsed:.0f}s (limit 600s)",
    )


# ---------------------------------------------------------------------------
# Criterion 5: forecast bound validity on the circle map
# ---------------------------------------------------------------------------


def test_forecast_bound_validity():
    n_modes = 5
    cfg = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5, seed=501)
    ref = circle_reference_matrices(cfg, n_modes)
    est = assemble_batched(
        generate_circle_batched(cfg, 64, 1000), fourier_dictionary(n_modes)
    )
    norm_K = 1.0
    delta_G, delta_A = deltas_from_reference(est, ref, norm_K)
    K_est = koopman_matrix(est)
    K_ref = koopman_matrix(ref)

    rng = np.random.default_rng(502)
    N = 2 * n_modes + 1
    checked = violations = 0
    worst_margin = np.inf
    for _ in range(20):
        g = rng.normal(size=N) + 1j * rng.normal(size=N)
        g = g / np.sqrt(np.real(g.conj() @ est.G @ g))  # Gram-unit wrt estimate
        norm_g = float(np.sqrt(np.real(g.conj() @ ref.G @ g)))
        for n in range(1, 11):
            lhs_vec = iterate(K_est, g, n) - iterate(K_ref, g, n)
            lhs = float(np.sqrt(np.real(lhs_vec.conj() @ ref.G @ lhs_vec)))
            dn = subspace_error(est, K_est, g, n, norm_K)
            cn = forecast_error_bound(
                ForecastBoundInputs(norm_K, delta_G, delta_A, dn), n
            )
            checked += 1
            if lhs > cn * norm_g:
                violations += 1
            worst_margin = min(worst_margin, cn * norm_g - lhs)
    ok = violations == 0
    _report(
        "forecast bound validity",
        ok,
        f"{checked} horizon/observable checks, {violations} violations; "
        f"smallest slack {worst_margin:.2e}; "
        f"delta_G={delta_G:.2e} delta_A={delta_A:.2e}",
    )


# ---------------------------------------------------------------------------
# Criterion 6: concentration bound consistency for the Gram estimator
# ---------------------------------------------------------------------------


def test_concentration_bound_consistency():
    d = fourier_dictionary(1)
    alpha, beta = dictionary_constants(d)
    sigma = 0.5
    rng = np.random.default_rng(601)
    kappa = np.column_stack([rng.random(20000), sigma * rng.random(20000)])
    ups = estimate_upsilon(kappa)
    eye = np.eye(d.size)

    n_seeds = 200
    cells = []
    for M in (1000, 4000):
        for p_target in (0.15, 0.5, 0.9):
            t = np.sqrt(
                48 * ups**2 * alpha**2 * beta**2
                * (2 * np.log(2 * d.size) - np.log(1 - p_target)) / M
            )
            p_G = concentration_bounds(
                ConcentrationInputs(M=M, N=d.size, t=t, upsilon=ups, c=2.0,
                                    alpha=alpha, beta=beta)
            ).p_G
            assert 0.1 <= p_G <= 0.95
            hits = 0
            for s in range(n_seeds):
                data = generate_circle_iid(
                    CircleMapConfig(c=0.2, amp=0.0, noise_sigma=sigma,
                                    seed=700 + 97 * s), M
                )
                G = assemble_unbatched(data, d).G
                if np.linalg.norm(G - eye, "fro") < t:
                    hits += 1
            freq = hits / n_seeds
            se = np.sqrt(p_G * (1 - p_G) / n_seeds)
            cells.append((M, p_G, freq, freq >= p_G - 3 * se))
    ok = all(c[3] for c in cells)
    summary = "; ".join(f"M={c[0]} p_G={c[1]:.2f} freq={c[2]:.2f}" for c in cells)
    _report("concentration consistency", ok, summary)


# ---------------------------------------------------------------------------
# Criterion 7: variance-pseudospectra nonincreasing under dictionary growth
# ---------------------------------------------------------------------------


def test_dictionary_refinement_monotonicity():
    cfg = CircleMapConfig(c=0.2, amp=0.0, noise_sigma=0.5, seed=701)
    data = generate_circle_batched(cfg, 64, 500)
    grid = rectangle_grid([-1.2, 1.2], [-1.2, 1.2], [21, 21])
    values = {}
    for n in (2, 4, 8):
        mats = assemble_batched(data, fourier_dictionary(n))
        values[n] = pseudospectrum(grid, mats, 0.3, kind="variance_residual").values
    slack24 = float(np.max(values[4] - values[2]))
    slack48 = float(np.max(values[8] - values[4]))
    ok = slack24 <= 1e-10 and slack48 <= 1e-10
    _report(
        "dictionary refinement monotonicity",
        ok,
        f"max increase n=2->4: {slack24:.2e}, n=4->8: {slack48:.2e} (slack 1e-10)",
    )
