import sys
import numpy as np
import pytest

from fockdyn.dynamics import spectral_decompose
from fockdyn.fock import enumerate_sector, fock_index, parse_state
from fockdyn.lattice import phi_extended_model, ring_model
from fockdyn.operators import build_hamiltonian

PSI0 = "|111000>_tau x |111000>_ups"


@pytest.fixture(scope="session")
def ring():
    return ring_model(6, 1.0, -0.05)


@pytest.fixture(scope="session")
def sector(ring):
    return enumerate_sector(ring, (3, 3))


@pytest.fixture(scope="session")
def eig(ring, sector):
    return spectral_decompose(build_hamiltonian(ring, sector))


@pytest.fixture(scope="session")
def psi0(ring, sector):
    v = np.zeros(sector.dim, dtype=complex)
    v[fock_index(sector, parse_state(PSI0, ring))] = 1.0
    return v


@pytest.fixture(scope="session")
def phi_model(ring):
    return phi_extended_model(ring, 1, 3.0, -0.7)


@pytest.fixture(scope="session")
def phi_sector(phi_model):
    return enumerate_sector(phi_model, (3, 3, 1))


@pytest.fixture(scope="session")
def phi_eig(phi_model, phi_sector):
    return spectral_decompose(build_hamiltonian(phi_model, phi_sector))


@pytest.fixture(scope="session")
def phi_psi0(phi_model, phi_sector):
    v = np.zeros(phi_sector.dim, dtype=complex)
    v[fock_index(phi_sector, parse_state(PSI0 + " x |10>_phi", phi_model))] = 1.0
    return v



def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
