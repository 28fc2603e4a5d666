"""Occupation-number basis of a fixed particle-number sector.

Each configuration is stored as one packed bit field per species, with bit
``i`` set when site ``i`` is occupied.  Modes are ordered species-major:
within a species the mode order is the site order, and operators of
different species commute (no sign string crosses a species boundary).

The basis is sorted lexicographically on the concatenated occupation string,
each species contributing its accessible sites left to right, so for the
six-site ring ``|000111>|000111>`` is index 0.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from fockdyn.errors import ModelError, SectorError
from fockdyn.lattice import ModelSpec


def popcount(x: int) -> int:
    return bin(x).count("1")


def bits_between(mask: int, a: int, b: int) -> int:
    """Number of set bits strictly between positions ``a`` and ``b``."""
    lo, hi = (a, b) if a < b else (b, a)
    window = ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)
    return popcount(mask & window)


@dataclass(frozen=True)
class FockConfiguration:
    labels: tuple[str, ...]
    bits: tuple[int, ...]

    def occupied(self, species: str, site: int) -> bool:
        return bool(self.bits[self.labels.index(species)] >> site & 1)

    def with_bits(self, species: str, mask: int) -> "FockConfiguration":
        k = self.labels.index(species)
        return FockConfiguration(self.labels, self.bits[:k] + (mask,) + self.bits[k + 1:])

    def counts(self) -> tuple[int, ...]:
        return tuple(popcount(b) for b in self.bits)

    def to_string(self, model: ModelSpec) -> str:
        parts = []
        for lab, mask in zip(self.labels, self.bits):
            s = "".join(str(mask >> i & 1) for i in model.accessible_sites(lab))
            parts.append(f"|{s}>_{lab}")
        return " x ".join(parts)


_KET = re.compile(r"\|([01]+)>_?(\w+)")


def parse_state(text: str, model: ModelSpec) -> FockConfiguration:
    """Read ``"|111000>_tau x |111000>_ups x |10>_phi"``.

    Each string runs over the species' accessible sites in increasing order,
    or over every lattice site when its length equals ``num_sites``.
    Species that are not mentioned are empty.
    """
    bits = dict.fromkeys(model.labels, 0)
    found = _KET.findall(text)
    if not found:
        raise SectorError(f"cannot parse Fock state {text!r}")
    for occ, lab in found:
        if lab not in bits:
            raise ModelError(f"unknown species {lab!r} in state {text!r}")
        acc = model.accessible_sites(lab)
        if len(occ) == len(acc):
            sites = acc
        elif len(occ) == model.num_sites:
            sites = range(model.num_sites)
        else:
            raise SectorError(
                f"state string for {lab!r} has {len(occ)} sites; expected "
                f"{len(acc)} (accessible) or {model.num_sites}")
        mask = 0
        for site, c in zip(sites, occ):
            if c == "1":
                if site not in acc:
                    raise SectorError(f"species {lab!r} cannot occupy site {site}")
                mask |= 1 << site
        bits[lab] = mask
    return FockConfiguration(model.labels, tuple(bits[lab] for lab in model.labels))


def _species_masks(sites: tuple[int, ...], count: int) -> list[int]:
    masks = []
    for combo in itertools.combinations(sites, count):
        m = 0
        for s in combo:
            m |= 1 << s
        masks.append(m)
    # lexicographic on the site string: site sites[0] is the most significant character
    rank = {s: len(sites) - 1 - k for k, s in enumerate(sites)}
    return sorted(masks, key=lambda m: sum(1 << rank[s] for s in sites if m >> s & 1))


class FockBasis:
    """Ordered configurations of one sector, with inverse lookup."""

    def __init__(self, model: ModelSpec, counts: tuple[int, ...], bits: np.ndarray):
        self.model = model
        self.counts = tuple(counts)
        self.labels = model.labels
        self.bits = bits
        self.bits.setflags(write=False)
        self._lookup = {tuple(int(v) for v in row): k for k, row in enumerate(bits)}
        self._cache: dict = {}

    @property
    def dim(self) -> int:
        return self.bits.shape[0]

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"FockBasis(counts={dict(zip(self.labels, self.counts))}, dim={self.dim})"

    def config(self, index: int) -> FockConfiguration:
        return FockConfiguration(self.labels, tuple(int(v) for v in self.bits[index]))

    def __iter__(self):
        return (self.config(k) for k in range(self.dim))

    @cached_property
    def occupations(self) -> np.ndarray:
        """Array ``[state, species, site]`` of 0/1 occupations."""
        sites = np.arange(self.model.num_sites)
        occ = (self.bits[:, :, None] >> sites[None, None, :]) & 1
        occ = occ.astype(np.int8)
        occ.setflags(write=False)
        return occ

    def is_compatible(self, other: "FockBasis") -> bool:
        return other is self or (self.model == other.model and self.counts == other.counts)


def enumerate_sector(model: ModelSpec, counts) -> FockBasis:
    """All configurations with the given number of particles per species.

    ``counts`` is a sequence aligned with ``model.species`` or a
    ``{label: count}`` map (missing labels count as zero).
    """
    if isinstance(counts, dict):
        for lab in counts:
            model.species_index(lab)
        counts = tuple(int(counts.get(lab, 0)) for lab in model.labels)
    else:
        counts = tuple(int(c) for c in counts)
    if len(counts) != len(model.species):
        raise SectorError(
            f"need one particle count per species {model.labels}, got {counts}")
    per_species = []
    for lab, c in zip(model.labels, counts):
        acc = model.accessible_sites(lab)
        if not 0 <= c <= len(acc):
            raise SectorError(
                f"count {c} for species {lab!r} out of range 0..{len(acc)}")
        per_species.append(_species_masks(acc, c))
    rows = list(itertools.product(*per_species))
    bits = np.array(rows, dtype=np.int64).reshape(len(rows), len(counts))
    expected = math.prod(len(m) for m in per_species)
    assert bits.shape[0] == expected
    return FockBasis(model, counts, bits)


def fock_index(basis: FockBasis, config: FockConfiguration) -> int:
    try:
        return basis._lookup[tuple(config.bits)]
    except KeyError:
        raise SectorError(f"configuration {config.bits} not in sector {basis.counts}") from None


def apply_hop(config: FockConfiguration, species: str, from_site: int, to_site: int):
    """Act with ``c+_{to} c_{from}`` of one species.

    Returns ``(new_config, sign)`` or ``None`` when the operator annihilates
    the state.  The sign counts same-species occupied modes strictly between
    the two sites.
    """
    k = config.labels.index(species)
    mask = config.bits[k]
    if from_site == to_site:
        return (config, 1) if mask >> from_site & 1 else None
    if not mask >> from_site & 1 or mask >> to_site & 1:
        return None
    sign = -1 if bits_between(mask, from_site, to_site) % 2 else 1
    new = mask ^ (1 << from_site) ^ (1 << to_site)
    return config.with_bits(species, new), sign
