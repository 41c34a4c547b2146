"""Derivative-free tuning of the 14 controller/filter gains.

The tunable parameters form a fixed-order vector

    kappa = (rho1, rho2, a10, a11, a12, a20, a21, a22,
             gamma11, gamma12, gamma13, gamma21, gamma22, gamma23)

for the two-vector configuration with diagonal filter weights
Lambda_i = diag(gamma_i1, gamma_i2, gamma_i3) and filter polynomials
P_i(x) = a_i0 + a_i1 x + a_i2 x^2. Box bounds keep every entry strictly
positive. The cost of a candidate is an integral performance index (ISE,
IAE, or ITAE) of the attitude error and torque over a finite-horizon
closed-loop run; candidates whose simulation diverges cost +inf. A
multi-start bounded Nelder-Mead search minimizes it; with a fixed seed the
whole procedure is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import so3
from .observer import DegenerateMeasurementsError
from .sim import GainSet, SimConfig, SimulationDiverged, simulate

KAPPA_SIZE = 14
KAPPA_NAMES = (
    "rho1", "rho2",
    "a10", "a11", "a12",
    "a20", "a21", "a22",
    "gamma11", "gamma12", "gamma13",
    "gamma21", "gamma22", "gamma23",
)

OBJECTIVE_KINDS = ("ise", "iae", "itae")

# Nelder-Mead stopping rule
SIMPLEX_XATOL = 1e-4
SIMPLEX_FATOL = 1e-6
DEFAULT_MAX_ITER = 500


def kappa0() -> np.ndarray:
    """Default starting point of the search."""
    return np.array([6.0, 6.0,
                     1.0, 0.4, 0.01,
                     1.0, 0.4, 0.01,
                     12.0, 11.0, 1.0,
                     10.0, 10.0, 10.0])


@dataclass
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != (KAPPA_SIZE,) or self.upper.shape != (KAPPA_SIZE,):
            raise ValueError(f"bounds must have {KAPPA_SIZE} entries")
        if not (self.lower > 0.0).all():
            raise ValueError("lower bounds must be strictly positive")
        if not (self.lower <= self.upper).all():
            raise ValueError("lower bounds must not exceed upper bounds")


def default_bounds() -> Bounds:
    """Box limits per parameter: rho in [0.01, 30], a_i0 in [1e-4, 4],
    a_i1 in [1e-4, 2], a_i2 in [1e-4, 0.1], gamma in [0.01, 50]."""
    lower = np.array([0.01, 0.01,
                      1e-4, 1e-4, 1e-4,
                      1e-4, 1e-4, 1e-4,
                      0.01, 0.01, 0.01,
                      0.01, 0.01, 0.01])
    upper = np.array([30.0, 30.0,
                      4.0, 2.0, 0.1,
                      4.0, 2.0, 0.1,
                      50.0, 50.0, 50.0,
                      50.0, 50.0, 50.0])
    return Bounds(lower, upper)


def unpack_kappa(kappa) -> GainSet:
    """Gain set for a parameter vector (diagonal filter weights)."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (KAPPA_SIZE,):
        raise ValueError(f"kappa must have {KAPPA_SIZE} entries, got {kappa.shape}")
    if not np.isfinite(kappa).all() or kappa.min() <= 0.0:
        raise ValueError("kappa entries must be strictly positive")
    rho = kappa[:2]
    coeffs = np.vstack([kappa[2:5], kappa[5:8]])
    lambdas = np.stack([np.diag(kappa[8:11]), np.diag(kappa[11:14])])
    return GainSet.from_values(rho, lambdas, coeffs)


def pack_kappa(gains: GainSet) -> np.ndarray:
    """Inverse of unpack_kappa; the filter weights must be diagonal."""
    if gains.filters.n_filters != 2:
        raise ValueError("the parameter vector covers exactly two measured vectors")
    for i, lam in enumerate(gains.filters.lambdas):
        if np.abs(lam - np.diag(np.diag(lam))).max() > 0.0:
            raise ValueError(f"filter weight {i} is not diagonal; cannot pack")
    return np.concatenate([
        gains.control.rho,
        gains.filters.poly_coeffs[0], gains.filters.poly_coeffs[1],
        np.diag(gains.filters.lambdas[0]), np.diag(gains.filters.lambdas[1]),
    ])


def project_to_bounds(kappa, bounds: Bounds) -> np.ndarray:
    """Componentwise clamp into the box."""
    return np.clip(np.asarray(kappa, dtype=float), bounds.lower, bounds.upper)


def euler_xyz_quat(angles_deg) -> np.ndarray:
    """Quaternion for intrinsic x-y-z rotations (roll, pitch, yaw) in degrees."""
    half = 0.5 * np.radians(np.asarray(angles_deg, dtype=float))
    qs = []
    for axis, h in enumerate(half):
        q = np.zeros(4)
        q[0] = math.cos(h)
        q[1 + axis] = math.sin(h)
        qs.append(q)
    return so3.quat_mul(so3.quat_mul(qs[0], qs[1]), qs[2])


def objective(kappa, config: SimConfig, kind: str = "ise", sigma: float = 0.1) -> float:
    """Performance index of a candidate gain vector on the configured run.

    ISE integrates |qbar|^2 + sigma |tau|^2, IAE the 1-norms, ITAE the
    time-weighted 1-norms, all by the trapezoid rule on the simulation grid
    (qbar here is the vector part of the error quaternion). A diverging or
    degenerate simulation scores +inf.
    """
    if kind not in OBJECTIVE_KINDS:
        raise ValueError(f"unknown objective kind {kind!r}; expected one of {OBJECTIVE_KINDS}")
    gains = unpack_kappa(kappa)
    run = SimConfig(config.plant_config, gains, config.initial,
                    dt=config.dt, t_final=config.t_final)
    try:
        traj = simulate(run)
    except (SimulationDiverged, DegenerateMeasurementsError):
        return math.inf
    qv = traj.qbar[:, 1:]
    tau = traj.tau
    if kind == "ise":
        integrand = (qv * qv).sum(axis=1) + sigma * (tau * tau).sum(axis=1)
    else:
        integrand = np.abs(qv).sum(axis=1) + sigma * np.abs(tau).sum(axis=1)
        if kind == "itae":
            integrand = traj.t * integrand
    return float(np.trapezoid(integrand, dx=run.dt))


@dataclass
class TuneResult:
    best_kappa: np.ndarray
    best_objective: float
    kind: str
    sigma: float
    starts: int
    rng_seed: int
    history: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "kappa_order": list(KAPPA_NAMES),
            "best_kappa": [float(x) for x in self.best_kappa],
            "best_objective": self.best_objective,
            "objective": self.kind,
            "sigma": self.sigma,
            "n_starts": self.starts,
            "rng_seed": self.rng_seed,
            "history": self.history,
        }


def _random_start(bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    # log-uniform: the boxes span several decades
    lo, hi = np.log(bounds.lower), np.log(bounds.upper)
    return np.exp(lo + rng.random(KAPPA_SIZE) * (hi - lo))


def multistart_optimize(config: SimConfig, bounds: Bounds | None = None,
                        kind: str = "ise", sigma: float = 0.1,
                        n_starts: int = 4, rng_seed: int = 0,
                        max_iter: int = DEFAULT_MAX_ITER,
                        log=None) -> TuneResult:
    """Bounded Nelder-Mead from the default start plus seeded random restarts.

    Deterministic for a fixed seed: each restart draws its initial point from
    its own seeded stream, so results do not depend on evaluation order.
    Raises if every start diverges.
    """
    if n_starts < 1:
        raise ValueError("need at least one start")
    bounds = bounds or default_bounds()
    seeds = np.random.SeedSequence(rng_seed).spawn(max(n_starts - 1, 1))
    box = list(zip(bounds.lower, bounds.upper))
    best_kappa, best_obj = None, math.inf
    history = []
    for start in range(n_starts):
        if start == 0:
            x0 = project_to_bounds(kappa0(), bounds)
        else:
            x0 = _random_start(bounds, np.random.default_rng(seeds[start - 1]))
        res = optimize.minimize(
            objective, x0, args=(config, kind, sigma),
            method="Nelder-Mead", bounds=box,
            options={"maxiter": max_iter, "xatol": SIMPLEX_XATOL,
                     "fatol": SIMPLEX_FATOL, "adaptive": True},
        )
        final = float(res.fun)
        if final < best_obj:
            best_obj = final
            best_kappa = project_to_bounds(res.x, bounds)
        history.append({
            "start": start,
            "x0": [float(v) for v in x0],
            "objective": final,
            "nfev": int(res.nfev),
            "iterations": int(res.nit),
            "best_so_far": best_obj,
        })
        if log is not None:
            log(f"start {start}: objective {final:.6g} after {res.nfev} evaluations"
                f" (best so far {best_obj:.6g})")
    if best_kappa is None or not math.isfinite(best_obj):
        raise RuntimeError("every start diverged; no usable gains found in the box")
    return TuneResult(best_kappa=best_kappa, best_objective=best_obj, kind=kind,
                      sigma=sigma, starts=n_starts, rng_seed=rng_seed, history=history)
