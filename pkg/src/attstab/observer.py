"""Angular-velocity reconstruction from filtered vector measurements.

No gyroscope reading enters anywhere here. Each measured direction b_i is
passed through a first-order matrix filter

    bhat_i' = A_i (b_i - bhat_i),        A_i = R_d^T P_i(Lambda_i) R_d,

where Lambda_i is a symmetric positive definite weight and P_i a quadratic
polynomial positive on the spectrum of Lambda_i. The filter rates stand in
for the unmeasurable b_i' in the exact relation

    w = -M^-1 sum_i S(b_i) Lambda_i b_i',   M = sum_i S(b_i)^T Lambda_i S(b_i),

giving the observer-like signal what = -M^-1 sum_i S(b_i) Lambda_i bhat_i'.
With the stacked filter error xi_i = b_i - bhat_i and B the stack of the
S(b_i), the same signal reads what = M^-1 B^T Gamma A xi, and the error obeys
xi' = -A xi + B w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import so3

SPD_TOL = 1e-9
M_DET_FLOOR = 1e-12


class DegenerateMeasurementsError(RuntimeError):
    """Measured directions do not span enough of R^3 (M singular)."""


def poly_matrix(coeffs, lam: np.ndarray) -> np.ndarray:
    """Evaluate a0 I + a1 L + a2 L^2 for a symmetric 3x3 L."""
    a0, a1, a2 = (float(c) for c in coeffs)
    return a0 * np.eye(3) + a1 * lam + a2 * (lam @ lam)


@dataclass
class FilterGains:
    """Per-measurement filter weights Lambda_i and polynomial coefficients.

    poly_coeffs rows are (a_i0, a_i1, a_i2) defining P_i(x) = a_i0 + a_i1 x
    + a_i2 x^2. Validity requires each Lambda_i symmetric positive definite
    and P_i positive on the eigenvalues of Lambda_i (all the construction
    needs; positivity on the whole positive axis is not required).
    """

    lambdas: np.ndarray       # (n, 3, 3)
    poly_coeffs: np.ndarray   # (n, 3)

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.poly_coeffs = np.asarray(self.poly_coeffs, dtype=float)
        if self.lambdas.ndim == 2:
            self.lambdas = self.lambdas[None, :, :]
        if self.poly_coeffs.ndim == 1:
            self.poly_coeffs = self.poly_coeffs[None, :]
        if self.lambdas.shape[1:] != (3, 3):
            raise ValueError(f"filter weights must be 3x3 each, got {self.lambdas.shape}")
        if self.poly_coeffs.shape != (self.lambdas.shape[0], 3):
            raise ValueError("need one (a0, a1, a2) triple per filter weight")
        for i, lam in enumerate(self.lambdas):
            scale = max(1.0, float(np.abs(lam).max()))
            if np.abs(lam - lam.T).max() > SPD_TOL * scale:
                raise ValueError(f"filter weight {i} is not symmetric")
            spectrum = np.linalg.eigvalsh(lam)
            if spectrum.min() <= SPD_TOL * scale:
                raise ValueError(f"filter weight {i} is not positive definite")
            values = np.polyval(self.poly_coeffs[i][::-1], spectrum)
            if values.min() <= 0.0:
                raise ValueError(
                    f"filter polynomial {i} is not positive on the weight spectrum "
                    f"(min P(lambda) = {values.min():.3e})")

    @property
    def n_filters(self) -> int:
        return self.lambdas.shape[0]


@dataclass
class FilterState:
    """Current filtered directions bhat_i, stacked (n, 3)."""

    b_hat: np.ndarray

    def __post_init__(self):
        self.b_hat = np.atleast_2d(np.asarray(self.b_hat, dtype=float))
        if self.b_hat.shape[1] != 3 or not np.isfinite(self.b_hat).all():
            raise ValueError("filter state must be finite (n, 3)")


def a_d_blocks(gains: FilterGains) -> np.ndarray:
    """The filter matrices seen from the setpoint frame: P_i(Lambda_i).

    These equal R_d A_i R_d^T, are symmetric positive definite and commute
    with the corresponding Lambda_i by construction.
    """
    return np.stack([poly_matrix(a, lam) for a, lam in zip(gains.poly_coeffs, gains.lambdas)])


def build_A_matrices(gains: FilterGains, desired_attitude) -> np.ndarray:
    """Body-frame filter matrices A_i = R_d^T P_i(Lambda_i) R_d, stacked (n, 3, 3)."""
    r_d = so3.rodrigues(np.asarray(desired_attitude, dtype=float))
    return np.stack([r_d.T @ p @ r_d for p in a_d_blocks(gains)])


def filter_derivative(state: FilterState, measured, a_matrices) -> np.ndarray:
    """Filter rates bhat_i' = A_i (b_i - bhat_i), stacked (n, 3)."""
    measured = np.asarray(measured, dtype=float)
    a_matrices = np.asarray(a_matrices, dtype=float)
    xi = measured - state.b_hat
    return np.einsum("ijk,ik->ij", a_matrices, xi)


def m_matrix(measured, lambdas) -> np.ndarray:
    """M = sum_i S(b_i)^T Lambda_i S(b_i); raises if numerically singular."""
    measured = np.atleast_2d(np.asarray(measured, dtype=float))
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim == 2:
        lambdas = lambdas[None, :, :]
    m = np.zeros((3, 3))
    for b, lam in zip(measured, lambdas):
        s = so3.skew(b)
        m += s.T @ lam @ s
    if abs(np.linalg.det(m)) <= M_DET_FLOOR:
        raise DegenerateMeasurementsError(
            "measurement matrix M is singular; measured directions are collinear")
    return m


def b_matrix(measured) -> np.ndarray:
    """Vertical stack of the S(b_i), shape (3n, 3); satisfies xi' = -A xi + B w."""
    measured = np.atleast_2d(np.asarray(measured, dtype=float))
    return np.vstack([so3.skew(b) for b in measured])


def reconstruct_omega(measured, lambdas, rates) -> np.ndarray:
    """Angular velocity implied by direction rates: -M^-1 sum_i S(b_i) Lambda_i rate_i.

    Fed the true rates b_i' = -S(w) b_i this returns w exactly; fed the
    filter rates it is the observer-like signal.
    """
    measured = np.atleast_2d(np.asarray(measured, dtype=float))
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim == 2:
        lambdas = lambdas[None, :, :]
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    acc = np.zeros(3)
    for b, lam, db in zip(measured, lambdas, rates):
        acc += np.cross(b, lam @ db)       # S(b) u = b x u
    m = m_matrix(measured, lambdas)
    try:
        m_inv = so3.inv3(m, det_floor=M_DET_FLOOR)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMeasurementsError(str(exc)) from exc
    return -(m_inv @ acc)


def omega_hat(state: FilterState, measured, gains: FilterGains, a_matrices) -> np.ndarray:
    """Observer-like angular velocity signal (zero whenever the filter error is zero)."""
    return reconstruct_omega(measured, gains.lambdas,
                             filter_derivative(state, measured, a_matrices))
