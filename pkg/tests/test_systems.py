import numpy as np
import pytest

from stokoop import (
    CircleMapConfig,
    InstabilityError,
    VdpConfig,
    assemble_batched,
    circle_alpha,
    circle_reference_matrices,
    circle_step,
    circle_variance,
    covariance_matrix,
    estimation_error,
    fourier_dictionary,
    generate_circle_batched,
    generate_circle_iid,
    vdp_batched_from_trajectory,
    vdp_drift,
    vdp_em_trajectory,
    vdp_lattice,
)


def _circle(sigma=1.0, amp=0.0, c=0.2, seed=0):
    return CircleMapConfig(c=c, amp=amp, noise_sigma=sigma, seed=seed)


# ---------------------------------------------------------------------------
# Circle map
# ---------------------------------------------------------------------------


def test_circle_step_wraps():
    cfg = _circle(amp=0.0, c=0.2)
    assert circle_step(0.9, 0.0, cfg) == pytest.approx(0.1)


def test_circle_step_full_wrap():
    cfg = _circle(amp=0.0, c=0.2)
    assert circle_step(0.0, 0.8, cfg) == pytest.approx(0.0)


def test_circle_step_zero_sine_at_origin():
    cfg = CircleMapConfig()  # benchmark defaults: c=1/5, amp=1/(4 pi)
    tau = 0.3
    assert circle_step(0.0, tau, cfg) == pytest.approx((0.2 + tau) % 1.0)


def test_circle_alpha_trivial_mode():
    assert circle_alpha(0, _circle()) == 1.0


def test_circle_alpha_vanishes_for_full_noise():
    cfg = _circle(sigma=1.0)
    for j in (1, -1, 2, 5):
        assert abs(circle_alpha(j, cfg)) < 1e-15


def test_circle_alpha_half_sigma_mode_one():
    cfg = _circle(sigma=0.5, c=0.2)
    want = np.exp(2j * np.pi / 5) * (2j / np.pi)
    assert circle_alpha(1, cfg) == pytest.approx(want, abs=1e-14)
    assert abs(circle_alpha(1, cfg)) == pytest.approx(2 / np.pi, abs=1e-14)


def test_circle_variance_values():
    assert circle_variance(0, _circle()) == pytest.approx(0.0)
    assert circle_variance(3, _circle(sigma=1.0)) == pytest.approx(1.0)
    assert circle_variance(1, _circle(sigma=0.5)) == pytest.approx(1 - 4 / np.pi**2)


def test_circle_config_validation():
    with pytest.raises(ValueError):
        CircleMapConfig(noise_sigma=0.0)
    with pytest.raises(ValueError):
        CircleMapConfig(noise_sigma=1.5)


def test_generate_circle_batched_shapes_and_weights():
    cfg = _circle(seed=1)
    data = generate_circle_batched(cfg, 10, 3)
    assert data.batch_count == 10 and data.realization_count == 3
    assert np.allclose(data.weights, 0.1)
    assert np.allclose(data.states_x[:, 0], np.arange(10) / 10)


def test_generate_circle_batched_deterministic():
    cfg = _circle(seed=5)
    a = generate_circle_batched(cfg, 8, 4)
    b = generate_circle_batched(cfg, 8, 4)
    for ra, rb in zip(a.realizations, b.realizations):
        assert np.array_equal(ra, rb)


def test_generate_circle_batched_realizations_independent():
    data = generate_circle_batched(_circle(seed=2), 16, 2)
    assert not np.array_equal(data.realizations[0], data.realizations[1])


def test_generate_circle_iid_deterministic():
    a = generate_circle_iid(_circle(seed=3), 20)
    b = generate_circle_iid(_circle(seed=3), 20)
    assert np.array_equal(a.states_x, b.states_x)
    assert np.array_equal(a.states_y, b.states_y)


def test_reference_matrices_require_amp_zero():
    with pytest.raises(ValueError):
        circle_reference_matrices(CircleMapConfig(amp=0.1), 2)


def test_assembled_matrices_converge_to_reference():
    cfg = _circle(sigma=0.5, seed=11)
    ref = circle_reference_matrices(cfg, 2)
    est = assemble_batched(generate_circle_batched(cfg, 64, 2500), fourier_dictionary(2))
    err = estimation_error(est, ref)
    assert err["G"] < 1e-13
    assert max(np.abs(est.A - ref.A).max(), err["A"]) < 5 / np.sqrt(2500)
    assert err["L"] < 5 / np.sqrt(2500)
    assert err["H"] < 5 / np.sqrt(2500)


def test_covariance_diagonal_matches_circle_variance():
    cfg = _circle(sigma=0.5, seed=13)
    m2 = 4000
    est = assemble_batched(generate_circle_batched(cfg, 64, m2), fourier_dictionary(2))
    diag = np.real(np.diag(covariance_matrix(est)))
    want = [circle_variance(j, cfg) for j in range(-2, 3)]
    assert np.max(np.abs(diag - want)) < 5 / np.sqrt(m2)


def test_full_noise_covariance_diagonal():
    # sigma = 1 makes every nonconstant mode carry unit variance
    cfg = _circle(sigma=1.0, seed=17)
    est = assemble_batched(generate_circle_batched(cfg, 32, 3000), fourier_dictionary(2))
    diag = np.real(np.diag(covariance_matrix(est)))
    assert abs(diag[2]) < 1e-12  # constant mode, sampled exactly
    assert np.max(np.abs(np.delete(diag, 2) - 1.0)) < 5 / np.sqrt(3000)


# ---------------------------------------------------------------------------
# Van der Pol
# ---------------------------------------------------------------------------


def test_vdp_drift_values():
    assert np.allclose(vdp_drift((0.0, 0.0), 0.5), [0.0, 0.0])
    assert np.allclose(vdp_drift((1.0, 1.0), 0.5), [1.0, -1.0])
    assert np.allclose(vdp_drift((0.0, 1.0), 0.5), [1.0, 0.5])


def test_vdp_config_validation():
    with pytest.raises(ValueError):
        VdpConfig(mu=0.0)
    with pytest.raises(ValueError):
        VdpConfig(em_step=0.007, koopman_dt=0.3)  # not an integer multiple
    with pytest.raises(ValueError):
        VdpConfig(burn_in=-1)


def test_vdp_deterministic_limit_cycle():
    cfg = VdpConfig(mu=0.5, delta=0.0, em_step=1e-3, koopman_dt=0.1, burn_in=200_000, seed=0)
    traj = vdp_em_trajectory(cfg, 300)
    radius = np.hypot(traj[:, 0], traj[:, 1])
    # one deterministic revolution takes ~64 samples at dt = 0.1
    per_rev = 64
    drift = abs(radius[:per_rev].max() - radius[-per_rev:].max())
    assert drift < 1e-2


def test_vdp_noise_band_around_cycle():
    cfg = VdpConfig(seed=4, burn_in=50_000)
    traj = vdp_em_trajectory(cfg, 2000)
    radius = np.hypot(traj[:, 0], traj[:, 1])
    assert 0.5 < radius.min() and radius.max() < 3.5


def test_vdp_trajectory_deterministic():
    cfg = VdpConfig(seed=21, burn_in=100)
    assert np.array_equal(vdp_em_trajectory(cfg, 50), vdp_em_trajectory(cfg, 50))


def test_vdp_batched_realizations_differ_with_noise():
    cfg = VdpConfig(seed=6, burn_in=1000)
    data = vdp_batched_from_trajectory(cfg, 50)
    assert data.realization_count == 2
    assert not np.array_equal(data.realizations[0], data.realizations[1])
    assert np.allclose(data.weights, 1 / 50)


def test_vdp_batched_coincide_without_noise():
    cfg = VdpConfig(delta=0.0, seed=6, burn_in=1000)
    data = vdp_batched_from_trajectory(cfg, 30)
    assert np.array_equal(data.realizations[0], data.realizations[1])


def test_vdp_instability_guard():
    cfg = VdpConfig(mu=8.0, delta=0.0, em_step=0.5, koopman_dt=1.0, burn_in=0, seed=0)
    with pytest.raises(InstabilityError):
        vdp_em_trajectory(cfg, 2000, x0=(3.0, 3.0))


def test_benchmark_scale_batched_counts():
    # the benchmark setting: 100 equispaced states, 2e4 realizations each
    data = generate_circle_batched(_circle(seed=1), 100, 20_000)
    assert data.batch_count == 100
    assert data.realization_count == 20_000
    assert data.batch_count * data.realization_count == 2_000_000


def test_lattice_point_factory():
    from stokoop import LatticePoint

    p = LatticePoint.make(1, 2, 0.5, 0.3)
    assert p.m == 1 and p.k == 2
    assert p.value == vdp_lattice(1, 2, 0.5, 0.3)


def test_vdp_lattice_values():
    assert vdp_lattice(0, 0, 0.5, 0.3) == 1.0
    v = vdp_lattice(0, 1, 0.5, 0.3)
    assert v.real == pytest.approx(0.9567, abs=5e-4)
    assert v.imag == pytest.approx(0.2911, abs=5e-4)
    assert abs(vdp_lattice(0, 1, 0.5, 0.3) - (0.956 + 0.290j)) < 5e-3
    assert vdp_lattice(1, 0, 0.5, 0.3).real == pytest.approx(np.exp(-0.15), abs=1e-12)
    assert abs(vdp_lattice(1, 0, 0.5, 0.3) - 0.864) < 5e-3
    with pytest.raises(ValueError):
        vdp_lattice(-1, 0, 0.5, 0.3)
