"""Per-sample diagnostics evaluated on a batch of state snapshots.

Each diagnostic is built from a small descriptor dict such as
``{"kind": "entropy", "sites": [0, 1, 2]}`` and produces one or more named
columns.
"""
from __future__ import annotations

import numpy as np

from fockdyn.entanglement import default_species, mi_mean_std, pairwise_mi, subsystem_entropy
from fockdyn.errors import ConfigError, FockDynError
from fockdyn.fock import FockBasis
from fockdyn.operators import bond_current_operator, number_operator

KINDS = ("entropy", "mi_pair", "mi_stats", "number", "current", "energy", "norm", "fidelity")


def _species_tag(species):
    return "" if species is None else "_" + "+".join(species)


class Diagnostic:
    def __init__(self, desc: dict):
        if not isinstance(desc, dict) or desc.get("kind") not in KINDS:
            raise ConfigError(f"unknown diagnostic {desc!r}; kinds are {KINDS}")
        self.desc = dict(desc)
        self.kind = desc["kind"]
        sp = desc.get("species")
        self.species = None if sp is None else ((sp,) if isinstance(sp, str) else tuple(sp))
        try:
            if self.kind == "entropy":
                self.sites = tuple(int(s) for s in desc["sites"])
                self.columns = ["S_" + "-".join(map(str, self.sites)) + _species_tag(self.species)]
            elif self.kind == "mi_pair":
                self.i, self.j = int(desc["i"]), int(desc["j"])
                if self.i == self.j:
                    raise ConfigError("mi_pair needs distinct sites")
                self.columns = [f"I_{self.i}_{self.j}"]
            elif self.kind == "mi_stats":
                self.columns = ["mi_mean", "mi_std"]
            elif self.kind == "number":
                self.site = int(desc["site"])
                if self.species is None or len(self.species) != 1:
                    raise ConfigError("number diagnostic needs exactly one species")
                self.columns = [f"n_{self.site}_{self.species[0]}"]
            elif self.kind == "current":
                self.bond = tuple(int(v) for v in desc["bond"])
                self.columns = [f"J_{self.bond[0]}_{self.bond[1]}" + _species_tag(self.species)]
            else:
                self.columns = [self.kind]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed diagnostic {desc!r}: {exc}") from None

    def __repr__(self):
        return f"Diagnostic({self.desc!r})"

    def evaluate(self, basis: FockBasis, states: np.ndarray, eig=None, initial=None) -> dict:
        """Column arrays for ``states`` of shape ``(n_samples, dim)``."""
        try:
            return self._evaluate(basis, states, eig, initial)
        except FockDynError:
            raise
        except ValueError as exc:
            raise ConfigError(f"diagnostic {self.desc!r}: {exc}") from None

    def _evaluate(self, basis, states, eig, initial):
        col = self.columns[0]
        if self.kind == "entropy":
            return {col: subsystem_entropy(basis, states, self.sites, self.species)}
        if self.kind == "mi_pair":
            species = default_species(basis) if self.species is None else self.species
            s_i = subsystem_entropy(basis, states, [self.i], species)
            s_j = subsystem_entropy(basis, states, [self.j], species)
            s_ij = subsystem_entropy(basis, states, [self.i, self.j], species)
            return {col: np.maximum(s_i + s_j - s_ij, 0.0)}
        if self.kind == "mi_stats":
            mean, std = mi_mean_std(pairwise_mi(basis, states, self.species))
            return {"mi_mean": mean, "mi_std": std}
        if self.kind == "number":
            op = number_operator(basis, self.site, self.species[0])
            return {col: np.abs(states) ** 2 @ op.values}
        if self.kind == "current":
            op = bond_current_operator(basis, self.bond, self.species)
            return {col: op.expectation(states.T)}
        if self.kind == "norm":
            return {col: np.linalg.norm(states, axis=1)}
        if self.kind == "energy":
            c = states @ eig.vectors.conj()
            return {col: np.abs(c) ** 2 @ eig.energies}
        if self.kind == "fidelity":
            return {col: np.abs(states @ initial.conj()) ** 2}
        raise AssertionError(self.kind)


def parse_diagnostics(descs) -> list[Diagnostic]:
    diags = [d if isinstance(d, Diagnostic) else Diagnostic(d) for d in (descs or [])]
    seen = set()
    for d in diags:
        for c in d.columns:
            if c in seen:
                raise ConfigError(f"duplicate diagnostic column {c!r}")
            seen.add(c)
    return diags
