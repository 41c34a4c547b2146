"""Velocity-free stabilizing torque.

The attitude-correcting part is built only from measured and setpoint
directions:

    z_rho = sum_i rho_i S(b_i^d) b_i,

with positive weights rho_i. Written through the error quaternion
Qbar = Q * Qd^-1 it becomes z_rho = -2 R_d^T (qbar0 I - S(qbar)) W qbar,
where W = -sum_i rho_i S(r_i)^2 is symmetric positive definite. The applied
torque is tau = z_rho - M what, damping through the observer signal instead
of a gyroscope. Nothing in the torque path reads the angular velocity or
the attitude itself; the call signatures only admit measured directions,
filter quantities, and gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3

# eigenvalue gaps below this fraction of the largest eigenvalue make the
# eigenbasis ill-determined; downstream analysis refuses to pick one
SIMPLE_GAP_TOL = 1e-9


@dataclass
class ControlGains:
    """Positive scalar weights rho_i, one per reference vector."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if self.rho.size < 1 or not np.isfinite(self.rho).all() or self.rho.min() <= 0.0:
            raise ValueError("control weights rho must all be positive and finite")


@dataclass
class WRho:
    """W = -sum_i rho_i S(r_i)^2 with its symmetric eigendecomposition.

    eigenvalues are ascending; eigenvectors[:, k] is the unit eigenvector of
    eigenvalues[k], sign-fixed so its first nonzero component is positive.
    simple_spectrum is False when some eigenvalue gap falls below
    SIMPLE_GAP_TOL times the largest eigenvalue.
    """

    matrix: np.ndarray        # (3, 3)
    eigenvalues: np.ndarray   # (3,) ascending
    eigenvectors: np.ndarray  # (3, 3) columns
    min_gap: float
    simple_spectrum: bool

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])


def _fix_sign(v: np.ndarray) -> np.ndarray:
    for comp in v:
        if abs(comp) > 1e-12:
            return v if comp > 0.0 else -v
    return v


def w_rho(gains: ControlGains, reference_vectors) -> WRho:
    """Build W = sum_i rho_i (|r_i|^2 I - r_i r_i^T) and its eigenstructure."""
    r = np.atleast_2d(np.asarray(reference_vectors, dtype=float))
    if r.shape[0] != gains.rho.size:
        raise ValueError("one rho per reference vector required")
    w = np.zeros((3, 3))
    for rho_i, r_i in zip(gains.rho, r):
        w += rho_i * ((r_i @ r_i) * np.eye(3) - np.outer(r_i, r_i))
    eigval, eigvec = np.linalg.eigh(w)
    if eigval[0] <= 0.0:
        raise ValueError("W is not positive definite; reference vectors are collinear")
    eigvec = np.column_stack([_fix_sign(eigvec[:, k]) for k in range(3)])
    gaps = np.diff(eigval)
    min_gap = float(gaps.min())
    return WRho(
        matrix=w,
        eigenvalues=eigval,
        eigenvectors=eigvec,
        min_gap=min_gap,
        simple_spectrum=bool(min_gap > SIMPLE_GAP_TOL * eigval[-1]),
    )


def z_rho_measured(gains: ControlGains, measured, desired) -> np.ndarray:
    """Attitude-correcting torque from measured directions: sum_i rho_i S(b_i^d) b_i."""
    measured = np.atleast_2d(np.asarray(measured, dtype=float))
    desired = np.atleast_2d(np.asarray(desired, dtype=float))
    if measured.shape != desired.shape:
        raise ValueError("measured and desired direction stacks must match")
    crosses = np.cross(desired, measured)
    return gains.rho @ crosses


def z_rho_quat(w: WRho, q_bar, desired_attitude) -> np.ndarray:
    """Same torque through the error quaternion: -2 R_d^T (qbar0 I - S(qbar)) W qbar."""
    q_bar = np.asarray(q_bar, dtype=float)
    so3.quat_norm_check(q_bar)
    r_d = so3.rodrigues(np.asarray(desired_attitude, dtype=float))
    qv = q_bar[1:]
    u = w.matrix @ qv
    return -2.0 * (r_d.T @ (q_bar[0] * u - np.cross(qv, u)))


def torque(gains: ControlGains, measured, desired, m, omega_hat_signal) -> np.ndarray:
    """Applied torque tau = z_rho - M what."""
    m = np.asarray(m, dtype=float)
    return z_rho_measured(gains, measured, desired) - m @ np.asarray(omega_hat_signal, dtype=float)
