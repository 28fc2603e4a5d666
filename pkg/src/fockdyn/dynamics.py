"""Exact propagation through a full spectral decomposition.

States are plain complex numpy vectors in the sector basis.  A negative time
means reverse evolution under the same Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fockdyn.errors import BasisMismatchError, InvariantViolation
from fockdyn.fock import FockBasis
from fockdyn.operators import DiagonalOperator, SparseOperator

NORM_TOL = 1e-9


@dataclass(frozen=True)
class EigenSystem:
    basis: FockBasis
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.energies)))

    def to_eigen(self, state: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ state

    def from_eigen(self, coeffs: np.ndarray) -> np.ndarray:
        return self.vectors @ coeffs

    def energy(self, state: np.ndarray) -> float:
        c = self.to_eigen(state)
        return float(np.sum(self.energies * np.abs(c) ** 2))

    def propagator(self, t: float) -> np.ndarray:
        """Dense ``exp(-iHt)``."""
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T


def spectral_decompose(H: SparseOperator) -> EigenSystem:
    if not H.hermitian:
        raise ValueError("spectral decomposition needs a Hermitian operator")
    dense = H.toarray()
    if np.iscomplexobj(dense) and not np.any(dense.imag):
        dense = dense.real
    w, v = np.linalg.eigh(dense)
    return EigenSystem(H.basis, w, v)


def _check(eig: EigenSystem, state: np.ndarray):
    if state.shape[0] != eig.dim:
        raise BasisMismatchError(
            f"state of length {state.shape[0]} does not match basis dimension {eig.dim}")


def evolve(eig: EigenSystem, state: np.ndarray, t: float) -> np.ndarray:
    """``exp(-iHt) |state>``."""
    _check(eig, state)
    if t == 0:
        return np.array(state, dtype=complex)
    c = eig.to_eigen(state)
    phase = np.exp(-1j * eig.energies * t)
    c = c * (phase if c.ndim == 1 else phase[:, None])
    return eig.from_eigen(c)


def evolve_many(eig: EigenSystem, state: np.ndarray, times) -> np.ndarray:
    """States at every time in ``times``, shape ``(len(times), dim)``."""
    _check(eig, state)
    times = np.asarray(times, dtype=float)
    c = eig.to_eigen(state)
    phases = np.exp(-1j * np.outer(times, eig.energies))
    return (phases * c[None, :]) @ eig.vectors.T


def _apply(op, state):
    if op is None:
        return state
    if isinstance(op, (DiagonalOperator, SparseOperator)):
        return op.apply(state)
    return op @ state


def apply_spread_operator(eig: EigenSystem, op, t: float, state: np.ndarray) -> np.ndarray:
    """``exp(iHt) O exp(-iHt) |state>``."""
    _check(eig, state)
    return evolve(eig, _apply(op, evolve(eig, state, t)), -t)


def check_norm(state: np.ndarray, where: str = ""):
    n = np.linalg.norm(state)
    if abs(n - 1.0) > NORM_TOL:
        raise InvariantViolation(f"norm drift {n - 1.0:.3e} {where}".rstrip())


def sequence_erasure(eig: EigenSystem, op: DiagonalOperator, t: float, n_steps: int,
                     initial: np.ndarray, observer=None):
    """Apply ``[O+ O(t)]`` ``n_steps`` times.

    Returns the list of states after k = 0..n_steps applications, or the list
    of ``observer(state)`` results if an observer callable is given.
    """
    if n_steps < 0:
        raise ValueError("number of repetitions must be non-negative")
    if isinstance(op, DiagonalOperator) and not op.is_unitary(NORM_TOL):
        raise InvariantViolation("sequence operator is not unitary")
    dag = op.adjoint()
    state = np.array(initial, dtype=complex)
    records = [observer(state) if observer else state]
    for k in range(1, n_steps + 1):
        state = dag.apply(apply_spread_operator(eig, op, t, state))
        check_norm(state, f"after erasure step {k}")
        records.append(observer(state) if observer else state)
    return records


def loschmidt_echo(eig_H: EigenSystem, eig_Hp: EigenSystem, initial: np.ndarray,
                   times) -> np.ndarray:
    """``L(t) = |<psi0| exp(iHt) exp(-i(H+dH)t) |psi0>|^2`` on a time grid."""
    if eig_H.dim != eig_Hp.dim or not eig_H.basis.is_compatible(eig_Hp.basis):
        raise BasisMismatchError("echo needs both Hamiltonians on the same basis")
    a = evolve_many(eig_H, initial, times)
    b = evolve_many(eig_Hp, initial, times)
    return np.clip(np.abs(np.sum(a.conj() * b, axis=1)) ** 2, 0.0, 1.0)
