import numpy as np
import pytest

from qratchet import tilting_system, flashing_system
from qratchet.propagator import PropagatorConfig, build_floquet_matrix
from qratchet.floquet import decompose


@pytest.fixture(scope="session")
def fig1_system():
    # the workhorse parameter point: strong biharmonic drive, broken
    # time-reversal symmetry, well inside the transporting regime
    return tilting_system(e1=2.0, e2=2.0, omega=2.0, theta=-0.5 * np.pi,
                          hbar=0.2, n_cut=32)


@pytest.fixture(scope="session")
def fig1_config():
    return PropagatorConfig(n_steps=512)


@pytest.fixture(scope="session")
def fig1_matrix(fig1_system, fig1_config):
    return build_floquet_matrix(fig1_system, fig1_config)


@pytest.fixture(scope="session")
def fig1_dec(fig1_matrix):
    return decompose(fig1_matrix)


@pytest.fixture(scope="session")
def sym_system():
    # theta = 0 keeps the drive even in time, so both discrete symmetries
    # hold and every Floquet state is non-transporting
    return tilting_system(e1=2.0, e2=2.0, omega=2.0, theta=0.0,
                          hbar=0.2, n_cut=24)


@pytest.fixture(scope="session")
def sym_matrix(sym_system):
    return build_floquet_matrix(sym_system, PropagatorConfig(n_steps=512))


@pytest.fixture(scope="session")
def sym_dec(sym_matrix):
    with np.errstate(all="ignore"):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return decompose(sym_matrix)


@pytest.fixture(scope="session")
def flash_system():
    return flashing_system(e1=2.0, e2=1.5, omega=1.0, theta=-0.5 * np.pi,
                           hbar=1.0, n_cut=14, k=1.5, s=0.25,
                           theta_p=0.5 * np.pi)


@pytest.fixture(scope="session")
def flash_matrix(flash_system):
    return build_floquet_matrix(flash_system, PropagatorConfig(n_steps=512))
