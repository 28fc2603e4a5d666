"""Microcanonical reference values for subsystem entropy and mutual information.

Two readings of the microstate count are provided:

* ``sector_uniform``: equal weight on every Fock configuration of the sector,
* ``energy_window``: equal weight on every eigenstate with
  ``|E - E0| <= delta_e``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fockdyn.dynamics import EigenSystem
from fockdyn.entanglement import DensityMatrix, resolve_subsystem, mixture_entropy, mixture_reduced
from fockdyn.errors import ConfigError
from fockdyn.fock import FockBasis

KINDS = ("sector_uniform", "energy_window")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str = "sector_uniform"
    center: float | None = None
    delta_e: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "energy_window":
            if self.center is None:
                raise ConfigError("energy_window ensemble needs a center energy")
            if not self.delta_e >= 0:
                raise ConfigError("delta_e must be non-negative")


def _members(basis: FockBasis, eig: EigenSystem | None, spec: EnsembleSpec) -> np.ndarray:
    """Equal-weight member states, one per row."""
    if spec.kind == "sector_uniform":
        return np.eye(basis.dim)
    if eig is None:
        raise ConfigError("energy_window ensemble needs an eigensystem")
    sel = np.abs(eig.energies - spec.center) <= spec.delta_e
    if not sel.any():
        raise ConfigError(f"energy window {spec.center} +/- {spec.delta_e} selects no eigenstate")
    return eig.vectors[:, sel].T


def omega(basis: FockBasis, eig: EigenSystem | None, spec: EnsembleSpec) -> int:
    return _members(basis, eig, spec).shape[0]


def ensemble_density(basis: FockBasis, eig: EigenSystem | None, spec: EnsembleSpec) -> DensityMatrix:
    members = _members(basis, eig, spec)
    rho = members.T @ members.conj() / members.shape[0]
    modes = tuple((s, lab) for lab in basis.labels for s in basis.model.accessible_sites(lab))
    return DensityMatrix(modes, rho)


def ensemble_reduced(basis: FockBasis, eig, spec: EnsembleSpec, sites, species=None) -> DensityMatrix:
    members = _members(basis, eig, spec)
    sites, species = resolve_subsystem(basis, sites, species)
    modes = tuple((s, lab) for lab in species for s in sites)
    weights = np.full(members.shape[0], 1.0 / members.shape[0])
    return DensityMatrix(modes, mixture_reduced(basis, members, weights, sites, species))


def ensemble_subsystem_entropy(basis: FockBasis, spec: EnsembleSpec, sites, eig=None,
                               species=None) -> float:
    members = _members(basis, eig, spec)
    weights = np.full(members.shape[0], 1.0 / members.shape[0])
    return mixture_entropy(basis, members, weights, sites, species)


def ensemble_mutual_information(basis: FockBasis, spec: EnsembleSpec, i: int, j: int,
                                eig=None, species=None) -> float:
    if i == j:
        raise ValueError("mutual information needs two distinct sites")
    s = [ensemble_subsystem_entropy(basis, spec, A, eig, species) for A in ([i], [j], [i, j])]
    return max(s[0] + s[1] - s[2], 0.0)
