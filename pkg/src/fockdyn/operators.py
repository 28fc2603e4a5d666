"""Sector-restricted Hamiltonians, observables and the local phase pulse."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from fockdyn.errors import BasisMismatchError, ModelError
from fockdyn.fock import FockBasis, bits_between, fock_index, FockConfiguration
from fockdyn.lattice import ModelSpec

HERMITIAN_TOL = 1e-12


def _check_state(basis: FockBasis, state: np.ndarray):
    if state.shape[0] != basis.dim:
        raise BasisMismatchError(
            f"state of length {state.shape[0]} does not live on a basis of dimension {basis.dim}")


@dataclass(frozen=True)
class SparseOperator:
    basis: FockBasis
    matrix: sp.csr_matrix
    hermitian: bool = True

    def __post_init__(self):
        if self.matrix.shape != (self.basis.dim, self.basis.dim):
            raise BasisMismatchError("operator shape does not match its basis")
        if self.hermitian:
            diff = self.matrix - self.matrix.conj().T
            if diff.nnz and abs(diff).max() > HERMITIAN_TOL:
                raise ValueError("operator flagged hermitian is not")

    def apply(self, state: np.ndarray) -> np.ndarray:
        _check_state(self.basis, state)
        return self.matrix @ state

    def expectation(self, state: np.ndarray):
        """``<psi|A|psi>``; a 2-D ``state`` holds one state per column."""
        value = np.sum(state.conj() * self.apply(state), axis=0)
        return value.real if self.hermitian else value

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class DiagonalOperator:
    basis: FockBasis
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.basis.dim,):
            raise BasisMismatchError("diagonal length does not match its basis")

    def apply(self, state: np.ndarray) -> np.ndarray:
        _check_state(self.basis, state)
        v = self.values if state.ndim == 1 else self.values[:, None]
        return v * state

    def expectation(self, state: np.ndarray):
        value = np.sum(self.values[:, None] * np.abs(state.reshape(self.basis.dim, -1)) ** 2, axis=0)
        if np.isrealobj(self.values):
            value = value.real
        return value[0] if state.ndim == 1 else value

    def adjoint(self) -> "DiagonalOperator":
        return DiagonalOperator(self.basis, self.values.conj())

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.abs(self.values) - 1.0) <= tol))

    def toarray(self) -> np.ndarray:
        return np.diag(self.values)

    @property
    def matrix(self):
        return sp.diags(self.values, format="csr")


def _hop_triplets(basis: FockBasis, k: int, a: int, b: int):
    """Rows/cols/signs for ``c+_b c_a`` of species ``k`` on the whole basis."""
    rows, cols, vals = [], [], []
    labels = basis.labels
    for col, row_bits in enumerate(basis.bits):
        mask = int(row_bits[k])
        if not mask >> a & 1 or mask >> b & 1:
            continue
        sign = -1.0 if bits_between(mask, a, b) % 2 else 1.0
        new = list(int(v) for v in row_bits)
        new[k] = mask ^ (1 << a) ^ (1 << b)
        rows.append(fock_index(basis, FockConfiguration(labels, tuple(new))))
        cols.append(col)
        vals.append(sign)
    return rows, cols, vals


def _check_model(model: ModelSpec, basis: FockBasis):
    # couplings may differ; the mode structure may not
    other = basis.model
    if other is model:
        return
    if (other.num_sites != model.num_sites or other.labels != model.labels
            or any(other.accessible_sites(lab) != model.accessible_sites(lab)
                   for lab in model.labels)):
        raise BasisMismatchError("basis was enumerated for a different model")


def build_hamiltonian(model: ModelSpec, basis: FockBasis) -> SparseOperator:
    _check_model(model, basis)
    d = basis.dim
    rows, cols, vals = [], [], []
    for k, species in enumerate(model.species):
        if species.hopping == 0.0:
            continue
        for i, j in species.allowed_edges:
            for a, b in ((i, j), (j, i)):
                r, c, v = _hop_triplets(basis, k, a, b)
                rows += r
                cols += c
                vals += [species.hopping * s for s in v]
    occ = basis.occupations.astype(float)
    diag = np.zeros(d)
    for k, species in enumerate(model.species):
        diag += occ[:, k, :] @ np.asarray(species.site_potentials)
    for inter in model.interactions:
        ka, kb = (model.species_index(lab) for lab in inter.species_pair)
        sites = list(inter.sites)
        diag += inter.strength * np.sum(occ[:, ka, sites] * occ[:, kb, sites], axis=1)
    rows += list(range(d))
    cols += list(range(d))
    vals += list(diag)
    H = sp.csr_matrix((vals, (rows, cols)), shape=(d, d), dtype=float)
    H.sum_duplicates()
    return SparseOperator(basis, H, hermitian=True)


def number_operator(basis: FockBasis, site: int, species: str) -> DiagonalOperator:
    k = basis.model.species_index(species)
    if not 0 <= site < basis.model.num_sites:
        raise ModelError(f"site index out of range: {site}")
    return DiagonalOperator(basis, basis.occupations[:, k, site].astype(float))


def bond_current_operator(basis: FockBasis, bond, species_set=None) -> SparseOperator:
    """Particle current ``i sum_tau J_tau (c+_a c_b - c+_b c_a)`` across ``bond = (a, b)``.

    Only species whose allowed edges include the bond contribute.
    """
    model = basis.model
    a, b = (int(v) for v in bond)
    if not (0 <= a < model.num_sites and 0 <= b < model.num_sites) or not model.lattice.has_edge(a, b):
        raise ModelError(f"bond {tuple(bond)} is not a lattice edge")
    labels = model.labels if species_set is None else tuple(species_set)
    d = basis.dim
    rows, cols, vals = [], [], []
    edge = (min(a, b), max(a, b))
    for lab in labels:
        k = model.species_index(lab)
        spec = model.species[k]
        if edge not in spec.allowed_edges or spec.hopping == 0.0:
            continue
        # c+_a c_b moves a particle b -> a
        r, c, v = _hop_triplets(basis, k, b, a)
        rows += r; cols += c; vals += [1j * spec.hopping * s for s in v]
        r, c, v = _hop_triplets(basis, k, a, b)
        rows += r; cols += c; vals += [-1j * spec.hopping * s for s in v]
    J = sp.csr_matrix((vals, (rows, cols)), shape=(d, d), dtype=complex)
    J.sum_duplicates()
    return SparseOperator(basis, J, hermitian=True)


def local_phase_unitary(basis: FockBasis, site: int, species: str, strength: float,
                        duration: float) -> DiagonalOperator:
    """``exp(-i * strength * duration * n_{site,species})``: a site potential
    switched on for ``duration`` while the rest of the Hamiltonian is off."""
    n = number_operator(basis, site, species).values
    if not (np.isfinite(strength) and np.isfinite(duration)):
        raise ValueError("pulse parameters must be finite")
    return DiagonalOperator(basis, np.exp(-1j * strength * duration * n))
