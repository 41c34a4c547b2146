"""Rigid-body rotational plant and body-frame vector measurements.

The plant is a rigid body with inertia J whose orientation Q evolves under
the quaternion kinematics, driven by Euler's equation for the body-frame
angular velocity. The sensors report n known inertial directions r_i
expressed in the body frame, b_i = R(Q)^T r_i; at least two of the r_i must
be non-collinear for the measurements to determine angular motion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import so3

COLLINEARITY_TOL = 1e-9
SPD_TOL = 1e-9


def _validate_inertia(j: np.ndarray) -> None:
    if j.shape != (3, 3):
        raise ValueError(f"inertia must be 3x3, got {j.shape}")
    scale = max(1.0, float(np.abs(j).max()))
    if np.abs(j - j.T).max() > SPD_TOL * scale:
        raise ValueError("inertia matrix is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (j + j.T))
    if eig.min() <= SPD_TOL * scale:
        raise ValueError(f"inertia matrix is not positive definite (min eigenvalue {eig.min():.3e})")


def _has_noncollinear_pair(r: np.ndarray) -> bool:
    n = r.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            ni, nj = np.linalg.norm(r[i]), np.linalg.norm(r[j])
            if np.linalg.norm(np.cross(r[i], r[j])) > COLLINEARITY_TOL * ni * nj:
                return True
    return False


@dataclass
class PlantConfig:
    """Inertia, inertial reference directions, and the attitude setpoint.

    Reference vectors are used as given (not normalized); only pairwise
    non-collinearity of at least one pair is required.
    """

    inertia: np.ndarray
    reference_vectors: np.ndarray         # (n, 3)
    desired_attitude: np.ndarray = field(default_factory=lambda: so3.IDENTITY_QUAT.copy())

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.reference_vectors = np.atleast_2d(np.asarray(self.reference_vectors, dtype=float))
        self.desired_attitude = np.asarray(self.desired_attitude, dtype=float)
        _validate_inertia(self.inertia)
        if self.reference_vectors.shape[0] < 2 or self.reference_vectors.shape[1] != 3:
            raise ValueError(
                f"need at least two 3-vectors of references, got shape {self.reference_vectors.shape}")
        if not np.isfinite(self.reference_vectors).all():
            raise ValueError("reference vectors must be finite")
        if not _has_noncollinear_pair(self.reference_vectors):
            raise ValueError("all reference vectors are collinear; need a non-collinear pair")
        so3.quat_norm_check(self.desired_attitude)
        # precomputed once; the dynamics never re-invert J
        self.inertia_inv = so3.inv3(self.inertia)
        self.r_d = so3.rodrigues(self.desired_attitude)

    @property
    def n_vectors(self) -> int:
        return self.reference_vectors.shape[0]


@dataclass
class PlantState:
    """Attitude quaternion and body-frame angular velocity."""

    attitude: np.ndarray   # (4,) unit quaternion
    omega: np.ndarray      # (3,) rad/s

    def __post_init__(self):
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        so3.quat_norm_check(self.attitude)
        if self.omega.shape != (3,) or not np.isfinite(self.omega).all():
            raise ValueError("omega must be a finite 3-vector")


def body_vectors(state: PlantState, config: PlantConfig) -> np.ndarray:
    """Measured directions b_i = R(Q)^T r_i, stacked (n, 3).

    Depends on the attitude only through the rotation, so b_i(-Q) = b_i(Q).
    """
    r = so3.rodrigues(state.attitude)
    return config.reference_vectors @ r    # rows are r_i^T R = (R^T r_i)^T


def desired_body_vectors(config: PlantConfig) -> np.ndarray:
    """Setpoint directions b_i^d = R_d^T r_i, stacked (n, 3). Constant."""
    return config.reference_vectors @ config.r_d


def quat_kinematics(state: PlantState) -> np.ndarray:
    """Attitude rate: q0' = -q.w/2, q' = (q0 I + S(q)) w / 2."""
    q = state.attitude
    w = state.omega
    out = np.empty(4)
    out[0] = -0.5 * (q[1:] @ w)
    out[1:] = 0.5 * (q[0] * w + np.cross(q[1:], w))
    return out


def euler_dynamics(state: PlantState, torque, config: PlantConfig) -> np.ndarray:
    """Angular acceleration J^-1 (-S(w) J w + tau)."""
    w = state.omega
    tau = np.asarray(torque, dtype=float)
    return config.inertia_inv @ (-np.cross(w, config.inertia @ w) + tau)


def reduced_kinematics(b, omega) -> np.ndarray:
    """Rate of a body-frame direction under rotation: b' = -S(w) b."""
    return -np.cross(omega, b)
