"""Closed-loop assembly, fixed-step RK4 integration, and energy monitoring.

The simulated state is the physical one: attitude quaternion Q, body-frame
angular velocity w, and the filtered directions bhat_i. Measurements,
observer signal, and torque are reassembled from it at every stage, so the
feedback path never touches w or Q directly. The energy-like function

    V = xi_d^T Gamma A_d xi_d + 4 qbar^T W qbar + w_d^T J_d w_d

(filter error, attitude error, kinetic term, all expressed in the setpoint
frame) is recorded along trajectories together with its closed-form rate
-2 xi_d^T Gamma A_d^2 xi_d; V is non-increasing whenever the filter weights
commute with the setpoint rotation (in particular for an identity setpoint,
or scalar weights).

The integrator core is compiled per configuration into a plain-float
closure: the state has only 7 + 3n entries, where array overhead dominates
the arithmetic, and the tuner calls tens of thousands of simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import observer, plant, so3
from .controller import ControlGains
from .observer import DegenerateMeasurementsError, FilterGains
from .plant import PlantConfig, PlantState

DEFAULT_DT = 0.01
DEFAULT_T_FINAL = 20.0
# convergence is declared when both error norms stay below this for one
# second of simulated time
CONVERGENCE_TOL = 1e-3
CONVERGENCE_HOLD = 1.0

CSV_HEADER = ("t,q0,q1,q2,q3,qbar0,qbar1,qbar2,qbar3,"
              "wx,wy,wz,what_x,what_y,what_z,tau_x,tau_y,tau_z,V")


class SimulationDiverged(RuntimeError):
    """Integration produced a non-finite state or excessive quaternion drift."""


@dataclass
class GainSet:
    """Controller weights and measurement-filter gains, one of each per reference vector."""

    control: ControlGains
    filters: FilterGains

    def __post_init__(self):
        if self.control.rho.size != self.filters.n_filters:
            raise ValueError("control and filter gains disagree on the number of vectors")

    @classmethod
    def from_values(cls, rho, lambdas, poly_coeffs) -> "GainSet":
        return cls(ControlGains(rho), FilterGains(lambdas, poly_coeffs))


@dataclass
class SimState:
    """Physical state plus filter state."""

    plant: PlantState
    filter: observer.FilterState


@dataclass
class SimConfig:
    plant_config: PlantConfig
    gains: GainSet
    initial: SimState
    dt: float = DEFAULT_DT
    t_final: float = DEFAULT_T_FINAL

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        n = self.plant_config.n_vectors
        if self.gains.filters.n_filters != n:
            raise ValueError(f"gain set sized for {self.gains.filters.n_filters} vectors, plant has {n}")
        if self.initial.filter.b_hat.shape != (n, 3):
            raise ValueError("initial filter state has the wrong shape")


def initial_state(config: PlantConfig, attitude, omega=None, filter_error=None) -> SimState:
    """Build a start state; filters start on the measurements (bhat = b) unless
    a per-vector filter error (n, 3) is supplied."""
    omega = np.zeros(3) if omega is None else np.asarray(omega, dtype=float)
    ps = PlantState(attitude, omega)
    b0 = plant.body_vectors(ps, config)
    if filter_error is not None:
        b0 = b0 - np.asarray(filter_error, dtype=float).reshape(b0.shape)
    return SimState(plant=ps, filter=observer.FilterState(b0))


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop run with derived per-sample quantities."""

    t: np.ndarray            # (N,)
    quat: np.ndarray         # (N, 4)
    qbar: np.ndarray         # (N, 4) error quaternion Q * Qd^-1
    omega: np.ndarray        # (N, 3)
    omega_hat: np.ndarray    # (N, 3)
    xi: np.ndarray           # (N, 3n) stacked filter errors
    tau: np.ndarray          # (N, 3)
    lyapunov: np.ndarray     # (N,)
    max_quat_drift: float
    convergence_time: float | None

    @property
    def n_samples(self) -> int:
        return self.t.size

    def final_state(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(qbar, omega, xi) at the last sample."""
        return self.qbar[-1], self.omega[-1], self.xi[-1]

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            for k in range(self.n_samples):
                row = [self.t[k], *self.quat[k], *self.qbar[k], *self.omega[k],
                       *self.omega_hat[k], *self.tau[k], self.lyapunov[k]]
                fh.write(",".join(str(float(x)) for x in row) + "\n")


# --------------------------------------------------------------------------
# compiled closed-loop dynamics
# --------------------------------------------------------------------------

def _rows(m) -> tuple:
    return tuple(tuple(float(x) for x in row) for row in np.asarray(m, dtype=float))


def _compile_dynamics(pc: PlantConfig, gains: GainSet):
    """Build f(y) -> (ydot, cache) over the flat state y = [q, w, bhat...].

    cache carries (b rows, xi rows, tau, M*what) for the sample recorder.
    Everything configuration-dependent is precomputed; the closure does pure
    float arithmetic.
    """
    n = pc.n_vectors
    refs = [tuple(float(x) for x in v) for v in pc.reference_vectors]
    b_des = [tuple(float(x) for x in v) for v in plant.desired_body_vectors(pc)]
    rho = tuple(float(x) for x in gains.control.rho)
    a_mats = observer.build_A_matrices(gains.filters, pc.desired_attitude)
    a_rows = [_rows(a) for a in a_mats]
    la_rows = [_rows(lam @ a) for lam, a in zip(gains.filters.lambdas, a_mats)]
    jr = _rows(pc.inertia)
    ji = _rows(pc.inertia_inv)
    idx = range(n)

    def f(y):
        q0, q1, q2, q3 = y[0], y[1], y[2], y[3]
        wx, wy, wz = y[4], y[5], y[6]
        # rotation of the (possibly slightly non-unit) quaternion,
        # R = I + 2 q0 S(q) + 2 S(q)^2 expanded entrywise
        xx = q1 * q1; yy = q2 * q2; zz = q3 * q3
        xy = q1 * q2; xz = q1 * q3; yz = q2 * q3
        ax = q0 * q1; ay = q0 * q2; az = q0 * q3
        r00 = 1.0 - 2.0 * (yy + zz); r01 = 2.0 * (xy - az); r02 = 2.0 * (xz + ay)
        r10 = 2.0 * (xy + az); r11 = 1.0 - 2.0 * (xx + zz); r12 = 2.0 * (yz - ax)
        r20 = 2.0 * (xz - ay); r21 = 2.0 * (yz + ax); r22 = 1.0 - 2.0 * (xx + yy)

        ydot = [0.0] * (7 + 3 * n)
        b_rows = []
        xi_rows = []
        zx = zy = zzt = 0.0      # direction-error torque
        mx = my = mz = 0.0       # M * what (observer damping torque)
        for i in idx:
            rx, ry, rz = refs[i]
            bx = r00 * rx + r10 * ry + r20 * rz
            by = r01 * rx + r11 * ry + r21 * rz
            bz = r02 * rx + r12 * ry + r22 * rz
            b_rows.append((bx, by, bz))
            k = 7 + 3 * i
            ex = bx - y[k]; ey = by - y[k + 1]; ez = bz - y[k + 2]
            xi_rows.append((ex, ey, ez))
            a = a_rows[i]
            ydot[k] = a[0][0] * ex + a[0][1] * ey + a[0][2] * ez
            ydot[k + 1] = a[1][0] * ex + a[1][1] * ey + a[1][2] * ez
            ydot[k + 2] = a[2][0] * ex + a[2][1] * ey + a[2][2] * ez
            la = la_rows[i]
            ux = la[0][0] * ex + la[0][1] * ey + la[0][2] * ez
            uy = la[1][0] * ex + la[1][1] * ey + la[1][2] * ez
            uz = la[2][0] * ex + la[2][1] * ey + la[2][2] * ez
            # S(b)^T u = u x b
            mx += uy * bz - uz * by
            my += uz * bx - ux * bz
            mz += ux * by - uy * bx
            dx, dy, dz = b_des[i]
            ri = rho[i]
            zx += ri * (dy * bz - dz * by)
            zy += ri * (dz * bx - dx * bz)
            zzt += ri * (dx * by - dy * bx)

        tx = zx - mx; ty = zy - my; tz = zzt - mz
        jwx = jr[0][0] * wx + jr[0][1] * wy + jr[0][2] * wz
        jwy = jr[1][0] * wx + jr[1][1] * wy + jr[1][2] * wz
        jwz = jr[2][0] * wx + jr[2][1] * wy + jr[2][2] * wz
        gx = tx - (wy * jwz - wz * jwy)
        gy = ty - (wz * jwx - wx * jwz)
        gz = tz - (wx * jwy - wy * jwx)
        ydot[4] = ji[0][0] * gx + ji[0][1] * gy + ji[0][2] * gz
        ydot[5] = ji[1][0] * gx + ji[1][1] * gy + ji[1][2] * gz
        ydot[6] = ji[2][0] * gx + ji[2][1] * gy + ji[2][2] * gz
        ydot[0] = -0.5 * (q1 * wx + q2 * wy + q3 * wz)
        ydot[1] = 0.5 * (q0 * wx + q2 * wz - q3 * wy)
        ydot[2] = 0.5 * (q0 * wy + q3 * wx - q1 * wz)
        ydot[3] = 0.5 * (q0 * wz + q1 * wy - q2 * wx)
        return ydot, (b_rows, xi_rows, (tx, ty, tz), (mx, my, mz))

    return f


class _Recorder:
    """Per-sample derived quantities (qbar, what, tau, V) from the kernel cache."""

    def __init__(self, pc: PlantConfig, gains: GainSet, n_samples: int):
        n = pc.n_vectors
        self.n = n
        qd = pc.desired_attitude
        self.qd_conj = np.array([qd[0], -qd[1], -qd[2], -qd[3]])
        self.lam = np.asarray(gains.filters.lambdas)
        # energy blocks in body coordinates: R_d^T (Lambda_i P_i) R_d and the
        # 4 W quadratic form; kinetic term uses J directly (frame invariant)
        pd = observer.a_d_blocks(gains.filters)
        rd = pc.r_d
        self.k_blocks = np.stack([rd.T @ (lam @ p) @ rd for lam, p in zip(self.lam, pd)])
        w = np.zeros((3, 3))
        for rho_i, r_i in zip(gains.control.rho, pc.reference_vectors):
            w += rho_i * ((r_i @ r_i) * np.eye(3) - np.outer(r_i, r_i))
        self.w4 = 4.0 * w
        self.inertia = pc.inertia
        self.t = np.empty(n_samples)
        self.quat = np.empty((n_samples, 4))
        self.qbar = np.empty((n_samples, 4))
        self.omega = np.empty((n_samples, 3))
        self.omega_hat = np.empty((n_samples, 3))
        self.xi = np.empty((n_samples, 3 * n))
        self.tau = np.empty((n_samples, 3))
        self.lyapunov = np.empty(n_samples)
        self._skew_buf = np.zeros((n, 3, 3))

    def record(self, k: int, t: float, y, cache) -> None:
        b_rows, xi_rows, tau, m_what = cache
        q = np.array(y[:4])
        w = np.array(y[4:7])
        p, c = q, self.qd_conj
        qbar = np.array([
            p[0] * c[0] - p[1] * c[1] - p[2] * c[2] - p[3] * c[3],
            p[0] * c[1] + c[0] * p[1] + p[2] * c[3] - p[3] * c[2],
            p[0] * c[2] + c[0] * p[2] + p[3] * c[1] - p[1] * c[3],
            p[0] * c[3] + c[0] * p[3] + p[1] * c[2] - p[2] * c[1],
        ])
        b = np.asarray(b_rows)
        xi = np.asarray(xi_rows)
        s = self._skew_buf
        s[:, 0, 1] = -b[:, 2]; s[:, 0, 2] = b[:, 1]
        s[:, 1, 0] = b[:, 2]; s[:, 1, 2] = -b[:, 0]
        s[:, 2, 0] = -b[:, 1]; s[:, 2, 1] = b[:, 0]
        m = np.matmul(s.transpose(0, 2, 1), np.matmul(self.lam, s)).sum(axis=0)
        try:
            m_inv = so3.inv3(m, det_floor=observer.M_DET_FLOOR)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMeasurementsError(
                f"measured directions became collinear at t = {t:.4f}") from exc
        what = m_inv @ np.asarray(m_what)
        v = (np.einsum("ij,ijk,ik->", xi, self.k_blocks, xi)
             + qbar[1:] @ self.w4 @ qbar[1:] + w @ self.inertia @ w)
        self.t[k] = t
        self.quat[k] = q
        self.qbar[k] = qbar
        self.omega[k] = w
        self.omega_hat[k] = what
        self.xi[k] = xi.ravel()
        self.tau[k] = tau
        self.lyapunov[k] = v


def _flatten(state: SimState) -> list:
    return ([float(x) for x in state.plant.attitude]
            + [float(x) for x in state.plant.omega]
            + [float(x) for x in state.filter.b_hat.ravel()])


def _unflatten(y, n: int) -> SimState:
    q = so3.quat_normalize(np.array(y[:4]))
    return SimState(plant=PlantState(q, np.array(y[4:7])),
                    filter=observer.FilterState(np.array(y[7:]).reshape(n, 3)))


def closed_loop_derivative(state: SimState, config: SimConfig):
    """Rates (q_dot, omega_dot, b_hat_dot) of the closed loop at a state."""
    f = _compile_dynamics(config.plant_config, config.gains)
    ydot, _ = f(_flatten(state))
    n = config.plant_config.n_vectors
    return (np.array(ydot[:4]), np.array(ydot[4:7]),
            np.array(ydot[7:]).reshape(n, 3))


def _rk4_flat(f, y, h: float):
    k1, cache = f(y)
    m = len(y)
    h2 = 0.5 * h
    y2 = [y[i] + h2 * k1[i] for i in range(m)]
    k2, _ = f(y2)
    y3 = [y[i] + h2 * k2[i] for i in range(m)]
    k3, _ = f(y3)
    y4 = [y[i] + h * k3[i] for i in range(m)]
    k4, _ = f(y4)
    h6 = h / 6.0
    out = [y[i] + h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in range(m)]
    return out, cache


def _renormalize(y, t: float):
    """Normalize the quaternion block in place; returns the pre-normalization drift."""
    nq2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]
    total = nq2
    for x in y[4:]:
        total += x * x
    if not math.isfinite(total):
        raise SimulationDiverged(f"state became non-finite at t = {t:.4f}")
    nq = math.sqrt(nq2)
    drift = abs(nq - 1.0)
    if drift > so3.NORM_DRIFT_LIMIT:
        raise SimulationDiverged(
            f"quaternion norm drift {drift:.3e} at t = {t:.4f}; step size too large for these gains")
    inv = 1.0 / nq
    y[0] *= inv; y[1] *= inv; y[2] *= inv; y[3] *= inv
    return drift


def rk4_step(state: SimState, dt: float, config: SimConfig) -> SimState:
    """One classical RK4 step followed by quaternion renormalization."""
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    f = _compile_dynamics(config.plant_config, config.gains)
    y, _ = _rk4_flat(f, _flatten(state), dt)
    _renormalize(y, dt)
    return _unflatten(y, config.plant_config.n_vectors)


def _detect_convergence(traj_t, qbar, omega, dt: float) -> float | None:
    err_ok = (np.linalg.norm(qbar[:, 1:], axis=1) < CONVERGENCE_TOL) & \
             (np.linalg.norm(omega, axis=1) < CONVERGENCE_TOL)
    hold = int(round(CONVERGENCE_HOLD / dt))
    if hold <= 0 or err_ok.size <= hold:
        return None
    # first index from which the condition holds for a full window
    run = 0
    for k, ok in enumerate(err_ok):
        run = run + 1 if ok else 0
        if run >= hold + 1:
            return float(traj_t[k - hold])
    return None


def simulate(config: SimConfig) -> Trajectory:
    """Integrate the closed loop on the uniform grid and record derived signals."""
    pc = config.plant_config
    f = _compile_dynamics(pc, config.gains)
    n_steps = int(round(config.t_final / config.dt))
    rec = _Recorder(pc, config.gains, n_steps + 1)
    y = _flatten(config.initial)
    dt = config.dt
    max_drift = 0.0
    for k in range(n_steps):
        y_next, cache = _rk4_flat(f, y, dt)
        rec.record(k, k * dt, y, cache)
        drift = _renormalize(y_next, (k + 1) * dt)
        if drift > max_drift:
            max_drift = drift
        y = y_next
    _, cache = f(y)
    rec.record(n_steps, n_steps * dt, y, cache)
    conv = _detect_convergence(rec.t, rec.qbar, rec.omega, dt)
    return Trajectory(
        t=rec.t, quat=rec.quat, qbar=rec.qbar, omega=rec.omega,
        omega_hat=rec.omega_hat, xi=rec.xi, tau=rec.tau, lyapunov=rec.lyapunov,
        max_quat_drift=max_drift, convergence_time=conv,
    )


# --------------------------------------------------------------------------
# energy function
# --------------------------------------------------------------------------

def error_quaternion(state: SimState, config: PlantConfig) -> np.ndarray:
    """Qbar = Q * Qd^-1."""
    return so3.quat_mul(state.plant.attitude, so3.quat_conj(config.desired_attitude))


def lyapunov_V(state: SimState, gains: GainSet, config: PlantConfig) -> float:
    """Energy-like function of the error state; zero exactly at the two
    aligned equilibria (qbar = (+-1, 0), w = 0, xi = 0)."""
    b = plant.body_vectors(state.plant, config)
    xi_d = (config.r_d @ (b - state.filter.b_hat).T).T
    pd = observer.a_d_blocks(gains.filters)
    v = 0.0
    for x, lam, p in zip(xi_d, gains.filters.lambdas, pd):
        v += x @ lam @ (p @ x)
    qbar = error_quaternion(state, config)
    qv = qbar[1:]
    w = np.zeros((3, 3))
    for rho_i, r_i in zip(gains.control.rho, config.reference_vectors):
        w += rho_i * ((r_i @ r_i) * np.eye(3) - np.outer(r_i, r_i))
    v += 4.0 * (qv @ w @ qv)
    wd = config.r_d @ state.plant.omega
    jd = config.r_d @ config.inertia @ config.r_d.T
    v += wd @ jd @ wd
    return float(v)


def lyapunov_Vdot(state: SimState, gains: GainSet, config: PlantConfig) -> float:
    """Closed-form rate of the energy function: -2 xi_d^T Gamma A_d^2 xi_d <= 0."""
    b = plant.body_vectors(state.plant, config)
    xi_d = (config.r_d @ (b - state.filter.b_hat).T).T
    pd = observer.a_d_blocks(gains.filters)
    v = 0.0
    for x, lam, p in zip(xi_d, gains.filters.lambdas, pd):
        px = p @ x
        v += px @ lam @ px
    return float(-2.0 * v)
