import numpy as np
import pytest

from fockdyn.dynamics import (apply_spread_operator, check_norm, evolve, evolve_many,
                              loschmidt_echo, sequence_erasure, spectral_decompose)
from fockdyn.errors import BasisMismatchError, InvariantViolation
from fockdyn.fock import enumerate_sector, fock_index, parse_state
from fockdyn.lattice import ring_model, with_site_potential
from fockdyn.operators import (DiagonalOperator, build_hamiltonian, local_phase_unitary,
                               number_operator)

import oracles


@pytest.fixture(scope="module")
def single():
    m = ring_model(6, 1.0, 0.0)
    b = enumerate_sector(m, (1, 0))
    e = spectral_decompose(build_hamiltonian(m, b))
    psi = np.zeros(b.dim, dtype=complex)
    psi[fock_index(b, parse_state("|100000>_tau", m))] = 1
    return b, e, psi


def test_single_particle_return_probability(single):
    b, e, psi = single
    n0 = number_operator(b, 0, "tau")
    t = np.linspace(0, 4 * np.pi, 100)
    # oracle: plane-wave sum over the six ring momenta
    expected = ((np.cos(2 * t) + 2 * np.cos(t)) / 3) ** 2
    got = np.abs(evolve_many(e, psi, t)) ** 2 @ n0.values
    assert np.max(np.abs(got - expected)) < 1e-8
    assert n0.expectation(evolve(e, psi, 2 * np.pi)) == pytest.approx(1.0, abs=1e-8)
    assert n0.expectation(evolve(e, psi, np.pi)) == pytest.approx(1 / 9, abs=1e-8)


def test_propagator_matches_taylor_oracle(ring, sector, eig, psi0):
    H = build_hamiltonian(ring, sector).toarray()
    t = 3.3
    U = oracles.expm_taylor(H, t)
    assert np.max(np.abs(eig.propagator(t) - U)) < 1e-8
    assert np.max(np.abs(evolve(eig, psi0, t) - U @ psi0)) < 1e-8


def test_evolve_many_agrees_with_evolve(eig, psi0):
    ts = [0.0, 0.5, 7.25, -3.0]
    many = evolve_many(eig, psi0, ts)
    for t, row in zip(ts, many):
        assert np.allclose(row, evolve(eig, psi0, t), atol=1e-12)


def test_composition_and_reversal(eig):
    v = oracles.random_state(eig.dim, 1)
    a = evolve(eig, evolve(eig, v, 1.7), 2.6)
    assert np.max(np.abs(a - evolve(eig, v, 4.3))) < 1e-10
    back = evolve(eig, evolve(eig, v, 250.0), -250.0)
    assert abs(abs(np.vdot(v, back)) ** 2 - 1) < 1e-9


def test_unitarity_and_energy(eig, psi0):
    U = eig.propagator(12.0)
    assert np.max(np.abs(U.conj().T @ U - np.eye(eig.dim))) < 1e-10
    e0 = eig.energy(psi0)
    for s in evolve_many(eig, psi0, np.linspace(0, 250, 11)):
        check_norm(s)
        assert abs(eig.energy(s) - e0) < 1e-8 * eig.norm


def test_dimension_mismatch(eig):
    with pytest.raises(BasisMismatchError):
        evolve(eig, np.ones(3, dtype=complex), 1.0)


def test_check_norm_raises():
    with pytest.raises(InvariantViolation):
        check_norm(np.array([1.0, 1e-3]))


def test_spread_operator_matches_heisenberg_picture(ring, sector, eig, psi0):
    O = local_phase_unitary(sector, 1, "tau", 1.0, 20.0)
    t = 5.0
    U = eig.propagator(t)
    Ot = U.conj().T @ np.diag(O.values) @ U
    assert np.max(np.abs(apply_spread_operator(eig, O, t, psi0) - Ot @ psi0)) < 1e-10


def test_sequence_erasure_identity_operator(sector, eig, psi0):
    ident = DiagonalOperator(sector, np.ones(sector.dim, dtype=complex))
    states = sequence_erasure(eig, ident, 50.0, 5, psi0)
    assert len(states) == 6
    for s in states:
        assert np.max(np.abs(s - psi0)) < 1e-10


def test_sequence_erasure_steps(sector, eig, psi0):
    O = local_phase_unitary(sector, 1, "tau", 1.0, 20.0)
    states = sequence_erasure(eig, O, 50.0, 3, psi0)
    manual = psi0
    for _ in range(3):
        manual = O.adjoint().apply(apply_spread_operator(eig, O, 50.0, manual))
    assert np.max(np.abs(states[-1] - manual)) < 1e-12
    norms = sequence_erasure(eig, O, 50.0, 3, psi0, observer=np.linalg.norm)
    assert np.allclose(norms, 1.0, atol=1e-10)
    with pytest.raises(InvariantViolation):
        sequence_erasure(eig, DiagonalOperator(sector, 2 * O.values), 50.0, 1, psi0)
    with pytest.raises(ValueError):
        sequence_erasure(eig, O, 50.0, -1, psi0)


def test_loschmidt_echo(ring, sector, eig, psi0):
    ts = np.arange(0, 250.5, 0.5)
    L0 = loschmidt_echo(eig, eig, psi0, ts)
    assert np.max(np.abs(L0 - 1)) < 1e-10
    pert = with_site_potential(ring, 1, "tau", 1.0)
    eig_p = spectral_decompose(build_hamiltonian(pert, sector))
    L = loschmidt_echo(eig, eig_p, psi0, ts)
    assert L[0] == pytest.approx(1.0)
    assert np.all((0 <= L) & (L <= 1))
    # short-time oracle: L ~ 1 - (Var dH) t^2 with dH = n_{1,tau}; n is 0 on psi0, so Var = 0
    # and the leading term is fourth order
    assert 1 - L[1] < 1e-2


def test_echo_basis_mismatch(eig, phi_eig, psi0):
    with pytest.raises(BasisMismatchError):
        loschmidt_echo(eig, phi_eig, psi0, [0.0])
