"""Lattice geometry, particle species and couplings of multi-species fermion models.

A model is the payload of the Hamiltonian

    H = sum_tau sum_<i,j> J_tau (c+_{i,tau} c_{j,tau} + h.c.)
        + sum_{tau,i} U_{i,tau} n_{i,tau}
        + sum_i sum_{tau != ups} U_{tau,ups} n_{i,tau} n_{i,ups}

Sites are 0-based throughout: a paper-style "site 2" is index 1 here.
The hopping carries a plus sign (J = +1 means +c+c), not the customary -J.

Species mobility is described by a subset of lattice edges, so a particle
confined to a single bond needs no special Hamiltonian code.  Every
interaction term is added once per unordered species pair.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from fockdyn.errors import ModelError

Edge = tuple[int, int]


def _edge(pair: Sequence[int]) -> Edge:
    if len(pair) != 2:
        raise ModelError(f"edge must have two endpoints, got {tuple(pair)!r}")
    i, j = (int(v) for v in pair)
    return (i, j) if i <= j else (j, i)


def _finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ModelError(f"non-finite coupling: {what} = {value!r}")
    return value


@dataclass(frozen=True)
class LatticeSpec:
    num_sites: int
    edges: tuple[Edge, ...] = ()
    site_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.num_sites) < 1:
            raise ModelError(f"num_sites must be positive, got {self.num_sites}")
        object.__setattr__(self, "num_sites", int(self.num_sites))
        seen = set()
        edges = []
        for raw in self.edges:
            e = _edge(raw)
            if not all(0 <= v < self.num_sites for v in e):
                raise ModelError(
                    f"site index out of range: edge {e} on {self.num_sites} sites")
            if e[0] == e[1]:
                raise ModelError(f"self-loop: edge {e}")
            if e in seen:
                raise ModelError(f"duplicate edge: {e}")
            seen.add(e)
            edges.append(e)
        object.__setattr__(self, "edges", tuple(edges))
        if self.site_labels is not None:
            labels = tuple(str(s) for s in self.site_labels)
            if len(labels) != self.num_sites:
                raise ModelError("site_labels must have one entry per site")
            object.__setattr__(self, "site_labels", labels)

    def has_edge(self, i: int, j: int) -> bool:
        return _edge((i, j)) in self.edges


@dataclass(frozen=True)
class SpeciesSpec:
    """One fermion family.

    ``allowed_edges=None`` means the species may use every lattice edge and
    ``site_potentials=None`` means zero potential; both are filled in by
    :func:`build_model`.
    """

    label: str
    hopping: float = 1.0
    site_potentials: tuple[float, ...] | None = None
    allowed_edges: tuple[Edge, ...] | None = None


@dataclass(frozen=True)
class InteractionSpec:
    species_pair: tuple[str, str]
    strength: float
    sites: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ModelSpec:
    lattice: LatticeSpec
    species: tuple[SpeciesSpec, ...]
    interactions: tuple[InteractionSpec, ...] = ()
    _accessible: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def num_sites(self) -> int:
        return self.lattice.num_sites

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.species)

    def species_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"unknown species {label!r}") from None

    def get_species(self, label: str) -> SpeciesSpec:
        return self.species[self.species_index(label)]

    def accessible_sites(self, label: str) -> tuple[int, ...]:
        """Sites a species can ever occupy.

        These are the endpoints of its allowed edges; an immobile species
        (no allowed edges) may sit anywhere on the lattice.
        """
        if label not in self._accessible:
            sp = self.get_species(label)
            sites = sorted({v for e in sp.allowed_edges for v in e})
            if not sites:
                sites = list(range(self.num_sites))
            self._accessible[label] = tuple(sites)
        return self._accessible[label]

    def to_dict(self) -> dict:
        lat = {"num_sites": self.lattice.num_sites,
               "edges": [list(e) for e in self.lattice.edges]}
        if self.lattice.site_labels is not None:
            lat["site_labels"] = list(self.lattice.site_labels)
        return {
            "lattice": lat,
            "species": [
                {"label": s.label, "hopping": s.hopping,
                 "site_potentials": list(s.site_potentials),
                 "allowed_edges": [list(e) for e in s.allowed_edges]}
                for s in self.species
            ],
            "interactions": [
                {"pair": list(x.species_pair), "strength": x.strength,
                 "sites": list(x.sites)}
                for x in self.interactions
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        try:
            lat = data["lattice"]
            lattice = LatticeSpec(
                num_sites=lat["num_sites"],
                edges=tuple(tuple(e) for e in lat.get("edges", [])),
                site_labels=lat.get("site_labels"),
            )
            species = []
            for s in data["species"]:
                pots = s.get("site_potentials")
                edges = s.get("allowed_edges")
                species.append(SpeciesSpec(
                    label=str(s["label"]),
                    hopping=s.get("hopping", 1.0),
                    site_potentials=None if pots is None else tuple(pots),
                    allowed_edges=None if edges is None else tuple(tuple(e) for e in edges),
                ))
            interactions = []
            for x in data.get("interactions", []):
                sites = x.get("sites")
                interactions.append(InteractionSpec(
                    species_pair=tuple(x["pair"]),
                    strength=x["strength"],
                    sites=None if sites is None else tuple(sites),
                ))
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed model section: {exc!r}") from None
        return build_model(lattice, species, interactions)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def build_model(lattice: LatticeSpec, species: Iterable[SpeciesSpec],
                interactions: Iterable[InteractionSpec] = ()) -> ModelSpec:
    """Validate the pieces of a model and resolve their defaults."""
    species = list(species)
    interactions = list(interactions)
    if not species:
        raise ModelError("a model needs at least one species")
    n = lattice.num_sites
    labels = [s.label for s in species]
    if len(set(labels)) != len(labels):
        raise ModelError(f"duplicate species labels: {labels}")

    resolved = []
    for s in species:
        pots = (0.0,) * n if s.site_potentials is None else tuple(s.site_potentials)
        if len(pots) != n:
            raise ModelError(
                f"species {s.label!r}: site_potentials needs {n} entries, got {len(pots)}")
        pots = tuple(_finite(p, f"U[{i},{s.label}]") for i, p in enumerate(pots))
        if s.allowed_edges is None:
            edges = lattice.edges
        else:
            edges = tuple(_edge(e) for e in s.allowed_edges)
            for e in edges:
                if not all(0 <= v < n for v in e):
                    raise ModelError(f"site index out of range: edge {e} of species {s.label!r}")
                if e not in lattice.edges:
                    raise ModelError(f"species {s.label!r}: edge {e} is not a lattice edge")
            if len(set(edges)) != len(edges):
                raise ModelError(f"duplicate edge in allowed_edges of species {s.label!r}")
        resolved.append(SpeciesSpec(str(s.label), _finite(s.hopping, f"J[{s.label}]"),
                                    pots, edges))

    checked = []
    for x in interactions:
        pair = tuple(str(v) for v in x.species_pair)
        if len(pair) != 2:
            raise ModelError(f"interaction needs two species, got {pair}")
        for lab in pair:
            if lab not in labels:
                raise ModelError(f"unknown species {lab!r} in interaction {pair}")
        if pair[0] == pair[1]:
            raise ModelError(f"interaction species must be distinct, got {pair}")
        sites = tuple(range(n)) if x.sites is None else tuple(int(v) for v in x.sites)
        for v in sites:
            if not 0 <= v < n:
                raise ModelError(f"site index out of range: {v} in interaction {pair}")
        checked.append(InteractionSpec(pair, _finite(x.strength, f"U[{pair}]"), sites))

    return ModelSpec(lattice, tuple(resolved), tuple(checked))


def ring_model(length: int = 6, hopping: float | dict = 1.0,
               interaction: float = -0.05) -> ModelSpec:
    """Periodic chain with two species ``tau`` and ``ups``.

    ``hopping`` is either a common value or a ``{"tau": J, "ups": J}`` map.
    """
    if length < 2:
        raise ModelError(f"ring needs at least 2 sites, got {length}")
    edges = []
    for i in range(length):
        e = _edge((i, (i + 1) % length))
        if e in edges:
            warnings.warn(f"ring of length {length}: bond {e} closes onto itself; "
                          "keeping a single edge", stacklevel=2)
            continue
        edges.append(e)
    if isinstance(hopping, dict):
        jt, ju = hopping["tau"], hopping["ups"]
    else:
        jt = ju = hopping
    lattice = LatticeSpec(length, tuple(edges))
    species = [SpeciesSpec("tau", jt), SpeciesSpec("ups", ju)]
    return build_model(lattice, species, [InteractionSpec(("tau", "ups"), interaction)])


def phi_extended_model(base: ModelSpec, attach_site: int = 1, J_phi: float = 3.0,
                       U_tau_phi: float = -0.7) -> ModelSpec:
    """Add an auxiliary site and a ``phi`` particle confined to one bond.

    The new site gets index ``base.num_sites`` and is linked only to
    ``attach_site``. ``phi`` couples to ``tau`` on ``attach_site`` and to
    nothing else; ``tau``/``ups`` keep their original edges and potentials.
    """
    n = base.num_sites
    if not 0 <= attach_site < n:
        raise ModelError(f"site index out of range: attach_site {attach_site} on {n} sites")
    if "tau" not in base.labels or "phi" in base.labels:
        raise ModelError("phi extension needs a base model with 'tau' and no 'phi'")
    aux = n
    bond = (attach_site, aux)
    lattice = LatticeSpec(n + 1, base.lattice.edges + (bond,))
    species = [SpeciesSpec(s.label, s.hopping, s.site_potentials + (0.0,), s.allowed_edges)
               for s in base.species]
    species.append(SpeciesSpec("phi", J_phi, (0.0,) * (n + 1), (bond,)))
    interactions = list(base.interactions)
    interactions.append(InteractionSpec(("tau", "phi"), U_tau_phi, (attach_site,)))
    return build_model(lattice, species, interactions)


def with_site_potential(model: ModelSpec, site: int, species: str, shift: float) -> ModelSpec:
    """Copy of ``model`` with ``shift`` added to U_{site,species}."""
    k = model.species_index(species)
    if not 0 <= site < model.num_sites:
        raise ModelError(f"site index out of range: {site}")
    species_list = list(model.species)
    sp = species_list[k]
    pots = list(sp.site_potentials)
    pots[site] += shift
    species_list[k] = SpeciesSpec(sp.label, sp.hopping, tuple(pots), sp.allowed_edges)
    return build_model(model.lattice, species_list, model.interactions)
