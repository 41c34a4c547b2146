import numpy as np
import pytest
from scipy.linalg import expm

from attstab import observer, plant, sim, so3
from attstab.observer import FilterGains, FilterState
from attstab.plant import PlantState
from conftest import random_unit_quat


def random_spd(rng, lo=0.5, hi=2.0):
    q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    return q @ np.diag(rng.uniform(lo, hi, size=3)) @ q.T


def test_gains_reject_asymmetric_weight():
    lam = np.array([[1.0, 0.3, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError, match="symmetric"):
        FilterGains([lam, np.eye(3)], [[1, 1, 1], [1, 1, 1]])


def test_gains_reject_indefinite_weight():
    with pytest.raises(ValueError, match="positive definite"):
        FilterGains([np.diag([1.0, -1.0, 1.0]), np.eye(3)], [[1, 1, 1], [1, 1, 1]])


def test_gains_reject_nonpositive_polynomial():
    # P(x) = -1 + 0 x + 0 x^2 is negative on any spectrum
    with pytest.raises(ValueError, match="not positive"):
        FilterGains([np.eye(3), np.eye(3)], [[-1, 0, 0], [1, 1, 1]])


def test_gains_accept_polynomial_positive_only_on_spectrum():
    # P(x) = 10 - x is negative for x > 10 but positive on spec(diag(1, 2, 3))
    FilterGains([np.diag([1.0, 2.0, 3.0])], [[10.0, -1.0, 1e-12]])


def test_build_a_identity_case():
    gains = FilterGains([np.eye(3)], [[1.0, 1.0, 1.0]])
    a = observer.build_A_matrices(gains, [1, 0, 0, 0])
    assert np.allclose(a[0], 3.0 * np.eye(3), atol=1e-15)


def test_build_a_benchmark_golden(gains_opt, plant_cfg):
    # a0 + a1 l + a2 l^2 per diagonal entry, frozen from direct evaluation
    a = observer.build_A_matrices(gains_opt.filters, plant_cfg.desired_attitude)
    assert np.allclose(np.diag(a[0]), [354.0, 144.232984801, 4.195142841], atol=1e-9)
    assert np.allclose(np.diag(a[1]), [8.036480996, 7.750664409, 51.375839201], atol=1e-9)


def test_rotated_blocks_commute_with_weights():
    rng = np.random.default_rng(20)
    for _ in range(20):
        lam = np.diag(rng.uniform(0.1, 5.0, size=3))
        coeffs = rng.uniform(0.1, 2.0, size=3)
        gains = FilterGains([lam], [coeffs])
        qd = random_unit_quat(rng)
        rd = so3.rodrigues(qd)
        a = observer.build_A_matrices(gains, qd)[0]
        rotated = rd @ a @ rd.T
        assert np.abs(lam @ rotated - rotated @ lam).max() < 1e-9
        # and the rotated block is SPD
        assert np.linalg.eigvalsh(0.5 * (rotated + rotated.T)).min() > 0


def test_gamma_a_d_symmetric_positive_definite():
    rng = np.random.default_rng(21)
    for _ in range(20):
        lam = random_spd(rng)
        gains = FilterGains([lam], [[0.5, 1.0, 0.3]])
        prod = lam @ observer.a_d_blocks(gains)[0]
        assert np.abs(prod - prod.T).max() < 1e-9
        assert np.linalg.eigvalsh(0.5 * (prod + prod.T)).min() > 0


def test_filter_derivative_at_rest():
    b = np.array([[0, 0, 1.0], [1, 0, 1.0]])
    gains = FilterGains([np.eye(3), np.eye(3)], [[1, 1, 1], [1, 1, 1]])
    a = observer.build_A_matrices(gains, [1, 0, 0, 0])
    rates = observer.filter_derivative(FilterState(b.copy()), b, a)
    assert np.array_equal(rates, np.zeros((2, 3)))


def test_filter_derivative_scalar_gain():
    a = np.array([2.0 * np.eye(3)])
    rates = observer.filter_derivative(FilterState([[0.0, 0, 0]]), [[1.0, 0, 0]], a)
    assert np.allclose(rates, [[2.0, 0, 0]], atol=1e-15)


def test_filter_error_decays_like_matrix_exponential():
    # frozen attitude: bhat' = A (b - bhat) with constant b has the closed
    # form error exp(-A t) applied to the initial error
    rng = np.random.default_rng(22)
    lam = np.diag([2.0, 1.0, 0.5])
    gains = FilterGains([lam], [[1.0, 0.5, 0.2]])
    a = observer.build_A_matrices(gains, [1, 0, 0, 0])
    b = np.array([[0.3, -0.4, 0.8]])
    err0 = rng.normal(size=3)
    state = FilterState(b - err0)
    dt, steps = 0.001, 500
    y = state.b_hat.copy()
    for _ in range(steps):
        k1 = observer.filter_derivative(FilterState(y), b, a)
        k2 = observer.filter_derivative(FilterState(y + 0.5 * dt * k1), b, a)
        k3 = observer.filter_derivative(FilterState(y + 0.5 * dt * k2), b, a)
        k4 = observer.filter_derivative(FilterState(y + dt * k3), b, a)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    expected_err = expm(-a[0] * dt * steps) @ err0
    assert np.abs((b - y)[0] - expected_err).max() < 1e-4


def test_m_matrix_golden():
    m = observer.m_matrix([[0, 0, 1.0], [1, 0, 1.0]], [np.eye(3), np.eye(3)])
    assert np.allclose(m, [[2, 0, -1], [0, 3, 0], [-1, 0, 1]], atol=1e-14)


def test_m_matrix_single_vector_singular():
    with pytest.raises(observer.DegenerateMeasurementsError):
        observer.m_matrix([[0, 0, 1.0]], [np.eye(3)])


def test_m_matrix_spd_for_noncollinear_pairs():
    rng = np.random.default_rng(23)
    for _ in range(30):
        b = rng.normal(size=(2, 3))
        if np.linalg.norm(np.cross(b[0], b[1])) < 0.1:
            continue
        lams = [random_spd(rng), random_spd(rng)]
        m = observer.m_matrix(b, lams)
        assert np.abs(m - m.T).max() < 1e-12
        assert np.linalg.eigvalsh(m).min() > 0


def test_b_matrix_zero_stack():
    assert np.array_equal(observer.b_matrix(np.zeros((2, 3))), np.zeros((6, 3)))


def test_b_matrix_gamma_identity():
    # B^T Gamma B = M
    rng = np.random.default_rng(24)
    for _ in range(20):
        b = rng.normal(size=(2, 3))
        if np.linalg.norm(np.cross(b[0], b[1])) < 0.1:
            continue
        lams = [random_spd(rng), random_spd(rng)]
        bm = observer.b_matrix(b)
        gamma = np.zeros((6, 6))
        gamma[:3, :3], gamma[3:, 3:] = lams
        assert np.allclose(bm.T @ gamma @ bm, observer.m_matrix(b, lams), atol=1e-12)


def test_b_matrix_annihilates_collinear_omega():
    b = np.array([[0, 0, 1.0], [0, 0, 1.0]])
    assert np.allclose(observer.b_matrix(b) @ [0, 0, 2.0], 0, atol=1e-15)


def test_omega_hat_zero_error():
    b = np.array([[0, 0, 1.0], [1, 0, 1.0]])
    gains = FilterGains([np.eye(3), np.eye(3)], [[1, 1, 1], [1, 1, 1]])
    a = observer.build_A_matrices(gains, [1, 0, 0, 0])
    what = observer.omega_hat(FilterState(b.copy()), b, gains, a)
    assert np.array_equal(what, np.zeros(3))


def test_reconstruction_exact_with_true_rates(plant_cfg, gains_start):
    # substituting the analytic rates b' = -S(w) b recovers w exactly
    rng = np.random.default_rng(25)
    worst = 0.0
    for _ in range(200):
        state = PlantState(random_unit_quat(rng), rng.normal(size=3))
        b = plant.body_vectors(state, plant_cfg)
        rates = np.stack([plant.reduced_kinematics(bi, state.omega) for bi in b])
        rec = observer.reconstruct_omega(b, gains_start.filters.lambdas, rates)
        worst = max(worst, np.abs(rec - state.omega).max())
    assert worst < 1e-12


def test_observer_forms_agree(plant_cfg, gains_start):
    # filtered-rate form vs M^-1 B^T Gamma A xi
    rng = np.random.default_rng(26)
    gains = gains_start.filters
    a = observer.build_A_matrices(gains, plant_cfg.desired_attitude)
    gamma = np.zeros((6, 6))
    gamma[:3, :3], gamma[3:, 3:] = gains.lambdas
    a_full = np.zeros((6, 6))
    a_full[:3, :3], a_full[3:, 3:] = a
    for _ in range(100):
        state = PlantState(random_unit_quat(rng), rng.normal(size=3))
        b = plant.body_vectors(state, plant_cfg)
        fs = FilterState(b - rng.normal(size=(2, 3)))
        xi = (b - fs.b_hat).ravel()
        lhs = observer.omega_hat(fs, b, gains, a)
        m = observer.m_matrix(b, gains.lambdas)
        rhs = np.linalg.solve(m, observer.b_matrix(b).T @ gamma @ a_full @ xi)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_filter_error_dynamics_match_finite_difference(plant_cfg, gains_start):
    # xi' = -A xi + B w along a simulated trajectory
    cfg = sim.SimConfig(plant_cfg, gains_start,
                        sim.initial_state(plant_cfg, [0.8, 0, 0, 0.6], [0.2, 0.1, -0.3],
                                          filter_error=0.05 * np.ones((2, 3))),
                        dt=0.01, t_final=2.0)
    traj = sim.simulate(cfg)
    a = observer.build_A_matrices(gains_start.filters, plant_cfg.desired_attitude)
    a_full = np.zeros((6, 6))
    a_full[:3, :3], a_full[3:, 3:] = a
    for k in range(1, traj.n_samples - 1, 10):
        state = PlantState(traj.quat[k], traj.omega[k])
        b = plant.body_vectors(state, plant_cfg)
        fd = (traj.xi[k + 1] - traj.xi[k - 1]) / (2 * cfg.dt)
        analytic = -a_full @ traj.xi[k] + observer.b_matrix(b) @ traj.omega[k]
        assert np.abs(fd - analytic).max() < 2e-3


def test_filter_error_vanishes_in_closed_loop(plant_cfg, gains_start):
    cfg = sim.SimConfig(plant_cfg, gains_start,
                        sim.initial_state(plant_cfg, [0.8, 0, 0, 0.6],
                                          filter_error=0.1 * np.ones((2, 3))),
                        dt=0.01, t_final=30.0)
    traj = sim.simulate(cfg)
    norms = np.linalg.norm(traj.xi, axis=1)
    assert norms[-1] < 1e-6
    # exponential tail: each 5 s window shrinks the error by a large factor
    for t0 in (15.0, 20.0, 25.0):
        k0, k1 = int(t0 / cfg.dt), int((t0 + 5.0) / cfg.dt)
        assert norms[k1] < 0.1 * norms[k0]
