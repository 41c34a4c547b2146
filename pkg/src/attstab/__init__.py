"""Velocity-free rigid-body attitude stabilization from vector measurements.

The feedback uses only body-frame measurements of known inertial directions:
first-order filters on the measured vectors feed an observer-like
angular-velocity signal, and the torque combines it with a direction-error
term. No gyroscope reading and no reconstructed attitude appear anywhere in
the loop. The package simulates the closed loop, verifies its energy
decrease, enumerates and classifies all equilibria, and tunes the gains by
bounded derivative-free search.
"""

from .analysis import (Equilibrium, GenCheck, LinearizationResult, check_gen,
                       enumerate_equilibria, linearize_stable, linearize_unstable)
from .controller import ControlGains, WRho, torque, w_rho, z_rho_measured, z_rho_quat
from .observer import (DegenerateMeasurementsError, FilterGains, FilterState,
                       build_A_matrices, m_matrix, omega_hat)
from .plant import PlantConfig, PlantState, body_vectors, desired_body_vectors
from .sim import (GainSet, SimConfig, SimState, SimulationDiverged, Trajectory,
                  initial_state, lyapunov_V, lyapunov_Vdot, rk4_step, simulate)
from .tuning import (Bounds, TuneResult, default_bounds, kappa0, multistart_optimize,
                     objective, pack_kappa, unpack_kappa)

__version__ = "0.1.0"
