import numpy as np
import pytest

from attstab import so3
from conftest import random_unit_quat


def test_skew_matches_displayed_form():
    m = so3.skew([1.0, 2.0, 3.0])
    assert np.array_equal(m, np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float))


def test_skew_zero():
    assert np.array_equal(so3.skew([0, 0, 0]), np.zeros((3, 3)))


def test_skew_is_cross_product():
    assert np.array_equal(so3.skew([1, 0, 0]) @ [0, 1, 0], [0, 0, 1])
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(so3.skew(x) @ y, np.cross(x, y), atol=1e-14)


def test_skew_identities():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = rng.normal(size=3), rng.normal(size=3)
        r = so3.rodrigues(random_unit_quat(rng))
        sx, sy = so3.skew(x), so3.skew(y)
        assert np.allclose(sx @ y, -sy @ x, atol=1e-12)
        assert np.allclose(sx @ x, 0, atol=1e-12)
        assert np.allclose(sx @ sy, np.outer(y, x) - (x @ y) * np.eye(3), atol=1e-12)
        assert np.allclose(sx @ sx, np.outer(x, x) - (x @ x) * np.eye(3), atol=1e-12)
        assert np.allclose(so3.skew(sx @ y), sx @ sy - sy @ sx, atol=1e-12)
        assert np.allclose(so3.skew(r @ x), r @ sx @ r.T, atol=1e-12)


def test_quat_mul_identity_element():
    q = np.array([0.8, 0.0, 0.0, 0.6])
    assert np.allclose(so3.quat_mul([1, 0, 0, 0], q), q, atol=1e-15)
    assert np.allclose(so3.quat_mul(q, [1, 0, 0, 0]), q, atol=1e-15)


def test_quat_mul_inverse():
    rng = np.random.default_rng(2)
    for _ in range(100):
        q = random_unit_quat(rng)
        assert np.allclose(so3.quat_mul(q, so3.quat_conj(q)), [1, 0, 0, 0], atol=1e-14)


def test_quat_mul_squared_z_rotation():
    # direct evaluation of the product formula
    q = np.array([0.8, 0.0, 0.0, 0.6])
    qq = so3.quat_mul(q, q)
    assert np.allclose(qq, [0.28, 0.0, 0.0, 0.96], atol=1e-15)
    assert abs(np.linalg.norm(qq) - 1.0) < 1e-15


def test_quat_conj_examples():
    assert np.array_equal(so3.quat_conj([1, 0, 0, 0]), [1, 0, 0, 0])
    assert np.array_equal(so3.quat_conj([0, 0, 0, 1]), [0, 0, 0, -1])


def test_rodrigues_identity():
    assert np.allclose(so3.rodrigues([1, 0, 0, 0]), np.eye(3), atol=1e-15)


def test_rodrigues_pi_about_z():
    assert np.allclose(so3.rodrigues([0, 0, 0, 1]), np.diag([-1.0, -1.0, 1.0]), atol=1e-15)


def test_rodrigues_z_rotation_golden():
    r = so3.rodrigues([0.8, 0.0, 0.0, 0.6])
    expected = np.array([[0.28, -0.96, 0.0], [0.96, 0.28, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(r, expected, atol=1e-15)
    so3.check_rotation(r)


def test_rodrigues_double_cover_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = random_unit_quat(rng)
        assert np.array_equal(so3.rodrigues(q), so3.rodrigues(-q))


def test_rodrigues_orthonormal_and_homomorphic():
    rng = np.random.default_rng(4)
    for _ in range(50):
        p, q = random_unit_quat(rng), random_unit_quat(rng)
        rp, rq = so3.rodrigues(p), so3.rodrigues(q)
        assert np.abs(rp.T @ rp - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(rp) - 1.0) < 1e-9
        assert np.allclose(so3.rodrigues(so3.quat_mul(p, q)), rp @ rq, atol=1e-9)


def test_quat_normalize_and_drift_fault():
    q = so3.quat_normalize([2.0, 0.0, 0.0, 0.0])
    assert np.array_equal(q, [1, 0, 0, 0])
    with pytest.raises(ValueError):
        so3.quat_normalize([1.0 + 1e-3, 0, 0, 0], max_drift=1e-6)
    # small drift is fine
    so3.quat_normalize([1.0 + 1e-9, 0, 0, 0], max_drift=1e-6)


def test_quat_norm_check():
    with pytest.raises(ValueError):
        so3.quat_norm_check([1.0, 0.1, 0, 0])


def test_inv3_matches_reference():
    rng = np.random.default_rng(5)
    for _ in range(50):
        m = rng.normal(size=(3, 3))
        if abs(np.linalg.det(m)) < 1e-3:
            continue
        assert np.allclose(so3.inv3(m), np.linalg.inv(m), atol=1e-10)


def test_inv3_singular_raises():
    with pytest.raises(np.linalg.LinAlgError):
        so3.inv3(np.ones((3, 3)))
