"""Quaternion and rotation primitives.

Conventions used throughout the package:

- quaternions are scalar-first float arrays ``[q0, q1, q2, q3]`` on the unit
  sphere S^3,
- rotation matrices are 3x3 arrays in SO(3),
- ``rodrigues`` maps S^3 onto SO(3) as a double cover: Q and -Q give the same
  rotation, and no sign convention is ever forced on quaternions (both signs
  must remain reachable so the controller can settle on either antipode).
"""

from __future__ import annotations

import numpy as np

# unit-norm / orthonormality tolerance for validation
UNIT_TOL = 1e-9
# a quaternion drifting further than this from unit norm before
# renormalization indicates an integrator fault, not roundoff
NORM_DRIFT_LIMIT = 1e-6

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def skew(x) -> np.ndarray:
    """Skew-symmetric matrix S(x) with S(x) y = x cross y."""
    x = np.asarray(x, dtype=float)
    return np.array([
        [0.0, -x[2], x[1]],
        [x[2], 0.0, -x[0]],
        [-x[1], x[0], 0.0],
    ])


def quat_mul(p, q) -> np.ndarray:
    """Quaternion product p * q (Hamilton convention, scalar first)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pv, qv = p[1:], q[1:]
    out = np.empty(4)
    out[0] = p[0] * q[0] - pv @ qv
    out[1:] = p[0] * qv + q[0] * pv + np.cross(pv, qv)
    return out


def quat_conj(q) -> np.ndarray:
    """Conjugate (inverse for unit quaternions): (q0, -q)."""
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[:1], -q[1:]])


def quat_norm_check(q, tol: float = UNIT_TOL) -> None:
    """Raise if q is not unit within tol."""
    q = np.asarray(q, dtype=float)
    err = abs(float(q @ q) - 1.0)
    if err > tol:
        raise ValueError(f"quaternion not unit: |q|^2 - 1 = {err:.3e}")


def quat_normalize(q, max_drift: float | None = None) -> np.ndarray:
    """Rescale q to unit norm.

    With max_drift set, a pre-normalization deviation beyond it raises
    (used after integration steps to catch a diverging solution early).
    """
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("quaternion norm is zero or non-finite")
    if max_drift is not None and abs(n - 1.0) > max_drift:
        raise ValueError(f"quaternion norm drift {abs(n - 1.0):.3e} exceeds {max_drift:.1e}")
    return q / n


def rodrigues(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion: I + 2 q0 S(q) + 2 S(q)^2."""
    q = np.asarray(q, dtype=float)
    s = skew(q[1:])
    return np.eye(3) + 2.0 * q[0] * s + 2.0 * (s @ s)


def check_rotation(m, tol: float = UNIT_TOL) -> None:
    """Raise if m is not a rotation matrix (orthonormal, det +1) within tol."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected 3x3 matrix, got {m.shape}")
    if np.abs(m.T @ m - np.eye(3)).max() > tol:
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(m) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")


def inv3(m, det_floor: float = 1e-12) -> np.ndarray:
    """Closed-form inverse of a 3x3 matrix with a determinant guard.

    Raises np.linalg.LinAlgError when |det| <= det_floor rather than
    returning a garbage inverse.
    """
    m = np.asarray(m, dtype=float)
    a, b, c = m[0]
    d, e, f = m[1]
    g, h, i = m[2]
    c00 = e * i - f * h
    c01 = f * g - d * i
    c02 = d * h - e * g
    det = a * c00 + b * c01 + c * c02
    if not np.isfinite(det) or abs(det) <= det_floor:
        raise np.linalg.LinAlgError(f"3x3 matrix is numerically singular (det = {det:.3e})")
    adj = np.array([
        [c00, c * h - b * i, b * f - c * e],
        [c01, a * i - c * g, c * d - a * f],
        [c02, b * g - a * h, a * e - b * d],
    ])
    return adj / det
