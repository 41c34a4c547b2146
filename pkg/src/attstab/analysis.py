"""Equilibrium structure and spectral stability classification.

Under a simple spectrum of W (the genericity condition checked here), the
closed loop has exactly eight equilibria: the two aligned antipodes
qbar = (+-1, 0), both attracting, and (0, +-v_k) for the three unit
eigenvectors v_k of W, all hyperbolic with an unstable direction. The
linearizations are assembled in setpoint-frame coordinates
(xi_d, attitude-error vector, w_d):

  stable pair:    [[-A_d,            0,          G ],
                   [ 0,              0,          I/2],
                   [-Jd^-1 G^T Gd Ad, -2 Jd^-1 W, 0 ]],   G = stack of S(r_i)

  unstable six:   same pattern with H_j = S((I + 2 S(v)^2) r_j) in place of
                  G_j and +2 Jd^-1 (lam I + S(v) W S(v)) in place of
                  -2 Jd^-1 W, after recentering the error quaternion on the
                  equilibrium.

Gd stacks the filter weights seen from the setpoint frame (R_d Lam_i R_d^T);
it equals Gamma whenever the weights commute with R_d, and always at an
identity setpoint. Both matrices match finite-difference Jacobians of the
simulated loop for arbitrary setpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import observer, plant, sim, so3
from .controller import WRho
from .plant import PlantConfig
from .sim import GainSet, SimState

# eigenvalues within this fraction of the spectral radius from the imaginary
# axis make a hyperbolicity call unreliable
HYPERBOLIC_TOL = 1e-7
EIG_RESIDUAL_TOL = 1e-8
MAX_DENSE_DIM = 64

STABLE = "stable"
UNSTABLE = "hyperbolic-unstable"


@dataclass
class GenCheck:
    """Result of the simple-spectrum (genericity) test on W."""

    simple: bool
    min_gap: float
    relative_gap: float
    discriminant: float          # of the characteristic cubic; zero iff repeated eigenvalue
    discriminant_sign: int


@dataclass
class Equilibrium:
    label: str                   # "Omega1+", "Omega2-", ...
    q_bar: np.ndarray            # (4,) error quaternion at the equilibrium
    classification: str          # STABLE or UNSTABLE
    eigenvalue: float | None = None   # W eigenvalue for the unstable six


@dataclass
class LinearizationResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray      # complex
    max_real_part: float
    min_abs_real_part: float
    spectral_radius: float
    verdict: str                 # "hurwitz" | "unstable hyperbolic" | "marginal"


def check_gen(w: WRho) -> GenCheck:
    """Distinct-eigenvalue test plus the characteristic-cubic discriminant."""
    m = w.matrix
    tr = float(np.trace(m))
    minors = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
              + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
              + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
    det = float(np.linalg.det(m))
    b, c, d = -tr, minors, -det
    disc = 18.0 * b * c * d - 4.0 * b ** 3 * d + b * b * c * c - 4.0 * c ** 3 - 27.0 * d * d
    lam_max = float(w.eigenvalues[-1])
    return GenCheck(
        simple=w.simple_spectrum,
        min_gap=w.min_gap,
        relative_gap=w.min_gap / lam_max if lam_max > 0 else 0.0,
        discriminant=disc,
        discriminant_sign=int(np.sign(disc)),
    )


def enumerate_equilibria(w: WRho) -> list[Equilibrium]:
    """The eight closed-loop equilibria; requires a simple spectrum of W."""
    if not w.simple_spectrum:
        raise ValueError(
            f"W has a near-repeated eigenvalue (gap {w.min_gap:.3e}); equilibria are not isolated")
    out = [
        Equilibrium("Omega1+", np.array([1.0, 0.0, 0.0, 0.0]), STABLE),
        Equilibrium("Omega1-", np.array([-1.0, 0.0, 0.0, 0.0]), STABLE),
    ]
    for k in range(3):
        v = w.eigenvectors[:, k]
        lam = float(w.eigenvalues[k])
        out.append(Equilibrium(f"Omega{k + 2}+", np.concatenate([[0.0], v]), UNSTABLE, lam))
        out.append(Equilibrium(f"Omega{k + 2}-", np.concatenate([[0.0], -v]), UNSTABLE, lam))
    return out


def equilibrium_sim_state(eq: Equilibrium, config: PlantConfig) -> SimState:
    """Map an equilibrium to physical coordinates: Q = qbar * Qd, w = 0, bhat = b."""
    q = so3.quat_mul(eq.q_bar, config.desired_attitude)
    return sim.initial_state(config, q)


def nearest_equilibrium(state: SimState, w: WRho, config: PlantConfig):
    """Closest equilibrium to a state and its distance.

    Distance is the largest of the error-quaternion offset, |w|, and the
    filter-error norms, so "within tol" means every component is there.
    """
    qbar = sim.error_quaternion(state, config)
    omega_n = float(np.linalg.norm(state.plant.omega))
    xi = plant.body_vectors(state.plant, config) - state.filter.b_hat
    xi_n = float(np.linalg.norm(xi, axis=1).max())
    best, best_d = None, np.inf
    for eq in enumerate_equilibria(w):
        d = max(float(np.linalg.norm(qbar - eq.q_bar)), omega_n, xi_n)
        if d < best_d:
            best, best_d = eq, d
    return best, best_d


def eigenvalues_dense(m) -> np.ndarray:
    """Full spectrum of a small dense real matrix, residual-checked."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got {m.shape}")
    if m.shape[0] > MAX_DENSE_DIM:
        raise ValueError(f"dimension {m.shape[0]} exceeds the dense-solver cap {MAX_DENSE_DIM}")
    vals, vecs = np.linalg.eig(m)
    scale = max(1.0, float(np.linalg.norm(m, 2)))
    residual = np.linalg.norm(m @ vecs - vecs * vals, axis=0).max()
    if residual > EIG_RESIDUAL_TOL * scale:
        raise np.linalg.LinAlgError(
            f"eigenvalue residual {residual:.3e} exceeds {EIG_RESIDUAL_TOL:.0e} * |m|")
    return vals


def _classify(matrix: np.ndarray) -> LinearizationResult:
    vals = eigenvalues_dense(matrix)
    max_re = float(vals.real.max())
    min_abs_re = float(np.abs(vals.real).min())
    rad = float(np.abs(vals).max())
    margin = HYPERBOLIC_TOL * rad
    if min_abs_re <= margin:
        verdict = "marginal"
    elif max_re > 0.0:
        verdict = "unstable hyperbolic"
    else:
        verdict = "hurwitz"
    return LinearizationResult(matrix, vals, max_re, min_abs_re, rad, verdict)


def _frame_blocks(config: PlantConfig, gains: GainSet):
    """Setpoint-frame ingredients shared by both linearizations."""
    n = config.n_vectors
    a_d = observer.a_d_blocks(gains.filters)                       # P_i(Lam_i)
    rd = config.r_d
    g_d = np.stack([rd @ lam @ rd.T for lam in gains.filters.lambdas])
    ad_full = np.zeros((3 * n, 3 * n))
    gd_ad = np.zeros((3 * n, 3 * n))
    for i in range(n):
        s = slice(3 * i, 3 * i + 3)
        ad_full[s, s] = a_d[i]
        gd_ad[s, s] = g_d[i] @ a_d[i]
    jd = rd @ config.inertia @ rd.T
    jd_inv = so3.inv3(jd)
    return ad_full, gd_ad, jd_inv


def _assemble(ad_full, gd_ad, jd_inv, coupling, attitude_block) -> np.ndarray:
    """Common sparsity pattern of both linearizations."""
    n3 = ad_full.shape[0]
    dim = n3 + 6
    m = np.zeros((dim, dim))
    m[:n3, :n3] = -ad_full
    m[:n3, n3 + 3:] = coupling
    m[n3:n3 + 3, n3 + 3:] = 0.5 * np.eye(3)
    m[n3 + 3:, :n3] = -jd_inv @ coupling.T @ gd_ad
    m[n3 + 3:, n3:n3 + 3] = jd_inv @ attitude_block
    return m


def linearize_stable(config: PlantConfig, gains: GainSet) -> LinearizationResult:
    """Linearization at the aligned equilibria qbar = (+-1, 0)."""
    w = _w_matrix(config, gains)
    g = np.vstack([so3.skew(r) for r in config.reference_vectors])
    ad_full, gd_ad, jd_inv = _frame_blocks(config, gains)
    return _classify(_assemble(ad_full, gd_ad, jd_inv, g, -2.0 * w))


def linearize_unstable(eq: Equilibrium, config: PlantConfig, gains: GainSet) -> LinearizationResult:
    """Linearization at one of the six misaligned equilibria qbar = (0, +-v)."""
    if eq.classification != UNSTABLE:
        raise ValueError(f"{eq.label} is not one of the misaligned equilibria")
    w = _w_matrix(config, gains)
    v = eq.q_bar[1:]
    lam = eq.eigenvalue if eq.eigenvalue is not None else float(v @ w @ v)
    sv = so3.skew(v)
    g3 = lam * np.eye(3) + sv @ w @ sv
    flip = np.eye(3) + 2.0 * (sv @ sv)          # rotation by pi about v
    h = np.vstack([so3.skew(flip @ r) for r in config.reference_vectors])
    ad_full, gd_ad, jd_inv = _frame_blocks(config, gains)
    return _classify(_assemble(ad_full, gd_ad, jd_inv, h, 2.0 * g3))


def _w_matrix(config: PlantConfig, gains: GainSet) -> np.ndarray:
    w = np.zeros((3, 3))
    for rho_i, r_i in zip(gains.control.rho, config.reference_vectors):
        w += rho_i * ((r_i @ r_i) * np.eye(3) - np.outer(r_i, r_i))
    return w
