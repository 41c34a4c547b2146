import numpy as np
import pytest

from attstab import benchmark, sim, tuning


@pytest.fixture(scope="session")
def plant_cfg():
    return benchmark.plant_config()


@pytest.fixture(scope="session")
def gains_opt():
    """ISE-optimized benchmark gains."""
    return tuning.unpack_kappa(benchmark.KAPPA_OPT_ISE)


@pytest.fixture(scope="session")
def gains_start():
    """Mid-box starting gains; mild filter eigenvalues, well resolved at dt = 0.01."""
    return tuning.unpack_kappa(benchmark.KAPPA_START)


def random_unit_quat(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_sim_state(rng, config, gains=None, omega_scale=1.0, xi_scale=0.0) -> sim.SimState:
    """Random state on the benchmark plant; optional filter error."""
    q = random_unit_quat(rng)
    w = rng.normal(size=3)
    w = w / np.linalg.norm(w) * rng.random() * omega_scale
    ferr = None
    if xi_scale:
        ferr = rng.normal(size=(config.n_vectors, 3)) * xi_scale
    return sim.initial_state(config, q, w, ferr)
