"""Fermionic reduced density matrices, von Neumann entropy and mutual information.

A subsystem is a set of sites together with the species whose modes on those
sites belong to it.  Within each species the subsystem modes are moved to the
front of the mode order by adjacent transpositions; every transposition of
two occupied modes contributes a factor -1.  After that reordering the
amplitudes factor as psi(a, b) and the complement is traced in the
occupation basis.  Modes of species outside the subsystem are always part of
the traced complement, and no sign is needed for them because different
species commute.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from fockdyn.errors import BasisMismatchError, ModelError
from fockdyn.fock import FockBasis

EIG_CLIP = 1e-12
DEFAULT_EXCLUDED = ("phi",)


@dataclass(frozen=True)
class DensityMatrix:
    modes: tuple[tuple[int, str], ...]
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True)
class MIStatistics:
    pairs: dict
    mean: float
    std: float

    @classmethod
    def from_pairs(cls, pairs: dict) -> "MIStatistics":
        vals = np.array(list(pairs.values()), dtype=float)
        return cls(dict(pairs), float(vals.mean()), float(vals.std()))


def default_species(basis: FockBasis) -> tuple[str, ...]:
    """Species counted by default: everything except the probe particle ``phi``."""
    labels = tuple(lab for lab in basis.labels if lab not in DEFAULT_EXCLUDED)
    return labels or basis.labels


def default_sites(basis: FockBasis, species=None) -> tuple[int, ...]:
    species = default_species(basis) if species is None else species
    return tuple(sorted({s for lab in species for s in basis.model.accessible_sites(lab)}))


@dataclass(frozen=True)
class _Partition:
    modes: tuple[tuple[int, str], ...]
    a_index: np.ndarray
    b_index: np.ndarray
    n_b: int
    sign: np.ndarray


def _partition(basis: FockBasis, sites, species, schedule: str = "front") -> _Partition:
    key = (tuple(sites), tuple(species), schedule)
    cached = basis._cache.get(("partition",) + key)
    if cached is not None:
        return cached
    model = basis.model
    occ = basis.occupations.astype(np.int64)
    d, n_species, L = occ.shape
    target = np.zeros((n_species, L), dtype=bool)
    for lab in species:
        target[model.species_index(lab), list(sites)] = True

    parity = np.zeros(d, dtype=np.int64)
    for lab in species:
        k = model.species_index(lab)
        n_t = occ[:, k, :] * target[k]
        n_o = occ[:, k, :] * ~target[k]
        if schedule == "front":
            # occupied complement modes sitting before each occupied target mode
            before = np.cumsum(n_o, axis=1) - n_o
            parity += np.sum(n_t * before, axis=1)
        elif schedule == "back":
            after = np.cumsum(n_o[:, ::-1], axis=1)[:, ::-1] - n_o
            parity += np.sum(n_t * after, axis=1)
        else:
            raise ValueError(f"unknown transposition schedule {schedule!r}")
    sign = np.where(parity % 2, -1.0, 1.0)

    modes = tuple((s, lab) for lab in species for s in sorted(sites))
    a_index = np.zeros(d, dtype=np.int64)
    for s, lab in modes:
        a_index = (a_index << 1) | occ[:, model.species_index(lab), s]
    rest = np.argwhere(~target)
    b_key = np.zeros(d, dtype=np.int64)
    for k, s in rest:
        b_key = (b_key << 1) | occ[:, k, s]
    uniq, b_index = np.unique(b_key, return_inverse=True)
    part = _Partition(modes, a_index, b_index.reshape(-1), len(uniq), sign)
    basis._cache[("partition",) + key] = part
    return part


def resolve_subsystem(basis: FockBasis, sites, species):
    model = basis.model
    sites = tuple(sorted({int(s) for s in sites}))
    if not sites:
        raise ModelError("subsystem must contain at least one site")
    for s in sites:
        if not 0 <= s < model.num_sites:
            raise ModelError(f"site index out of range: {s}")
    species = default_species(basis) if species is None else tuple(species)
    for lab in species:
        model.species_index(lab)
    return sites, species


def reduced_matrices(basis: FockBasis, states: np.ndarray, sites, species=None,
                     schedule: str = "front") -> np.ndarray:
    """Reduced density matrices for a batch of pure states.

    ``states`` has shape ``(dim,)`` or ``(n_states, dim)``; the result has
    shape ``(2**m, 2**m)`` or ``(n_states, 2**m, 2**m)``.
    """
    sites, species = resolve_subsystem(basis, sites, species)
    states = np.asarray(states)
    if states.shape[-1] != basis.dim:
        raise BasisMismatchError(
            f"state of length {states.shape[-1]} does not match basis dimension {basis.dim}")
    part = _partition(basis, sites, species, schedule)
    batch = states.reshape(-1, basis.dim)
    n_a = 1 << len(part.modes)
    M = np.zeros((batch.shape[0], n_a, part.n_b), dtype=complex)
    M[:, part.a_index, part.b_index] = batch * part.sign
    rho = M @ M.conj().transpose(0, 2, 1)
    return rho[0] if states.ndim == 1 else rho


def _mixture_factor(basis, states, weights, sites, species, schedule):
    sites, species = resolve_subsystem(basis, sites, species)
    states = np.atleast_2d(states)
    if states.shape[-1] != basis.dim:
        raise BasisMismatchError(
            f"state of length {states.shape[-1]} does not match basis dimension {basis.dim}")
    part = _partition(basis, sites, species, schedule)
    n_a, n = 1 << len(part.modes), states.shape[0]
    scaled = states * np.sqrt(np.asarray(weights, dtype=float))[:, None] * part.sign
    M = np.zeros((n_a, n, part.n_b), dtype=complex)
    M[part.a_index, :, part.b_index] = scaled.T
    return M.reshape(n_a, n * part.n_b)


def mixture_reduced(basis: FockBasis, states: np.ndarray, weights, sites, species=None,
                    schedule: str = "front") -> np.ndarray:
    """``sum_k w_k rho_A(states[k])`` without forming the per-state matrices."""
    M = _mixture_factor(basis, states, weights, sites, species, schedule)
    return M @ M.conj().T


def mixture_entropy(basis: FockBasis, states: np.ndarray, weights, sites, species=None) -> float:
    """Entropy of the reduced mixture; uses the smaller of ``M M+`` and ``M+ M``."""
    M = _mixture_factor(basis, states, weights, sites, species, "front")
    G = M @ M.conj().T if M.shape[0] <= M.shape[1] else M.conj().T @ M
    return float(max(entropy_of(G), 0.0))


def reduced_density_matrix(basis: FockBasis, state: np.ndarray, sites, species=None,
                           schedule: str = "front") -> DensityMatrix:
    """Reduce a pure state vector or a sector density matrix to ``sites``.

    ``species`` defaults to every species except ``phi``.
    """
    sites, species = resolve_subsystem(basis, sites, species)
    state = np.asarray(state)
    part = _partition(basis, sites, species, schedule)
    if state.ndim == 2 and state.shape == (basis.dim, basis.dim):
        w, v = np.linalg.eigh(state)
        keep = w > EIG_CLIP
        rho = mixture_reduced(basis, v[:, keep].T, w[keep], sites, species, schedule)
    else:
        rho = reduced_matrices(basis, state, sites, species, schedule)
    return DensityMatrix(part.modes, rho)


def entropy_of(rho: np.ndarray) -> np.ndarray:
    """Von Neumann entropy (natural log) of one matrix or a stack of them."""
    p = np.linalg.eigvalsh(rho)
    p = np.where(p > EIG_CLIP, p, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=-1)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    tr = rho.trace()
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    return float(max(entropy_of(rho.matrix), 0.0))


def subsystem_entropy(basis: FockBasis, states: np.ndarray, sites, species=None) -> np.ndarray:
    """Entropy of ``sites`` for one state or a batch.

    For a pure state the nonzero spectrum of rho_A equals that of the
    complement, so the smaller of the two Gram matrices is diagonalised.
    """
    sites, species = resolve_subsystem(basis, sites, species)
    states = np.asarray(states)
    if states.shape[-1] != basis.dim:
        raise BasisMismatchError(
            f"state of length {states.shape[-1]} does not match basis dimension {basis.dim}")
    part = _partition(basis, sites, species)
    batch = states.reshape(-1, basis.dim)
    n_a = 1 << len(part.modes)
    M = np.zeros((batch.shape[0], n_a, part.n_b), dtype=complex)
    M[:, part.a_index, part.b_index] = batch * part.sign
    if n_a <= part.n_b:
        G = M @ M.conj().transpose(0, 2, 1)
    else:
        G = M.conj().transpose(0, 2, 1) @ M
    S = entropy_of(G)
    return S[0] if states.ndim == 1 else S


def mutual_information(basis: FockBasis, state: np.ndarray, i: int, j: int,
                       species=None) -> float:
    if i == j:
        raise ValueError("mutual information needs two distinct sites")
    s_i = von_neumann_entropy(reduced_density_matrix(basis, state, [i], species))
    s_j = von_neumann_entropy(reduced_density_matrix(basis, state, [j], species))
    s_ij = von_neumann_entropy(reduced_density_matrix(basis, state, [i, j], species))
    return max(s_i + s_j - s_ij, 0.0)


def pairwise_mi(basis: FockBasis, states: np.ndarray, species=None, sites=None) -> dict:
    """``{(i, j): I(i:j)}`` for every site pair, vectorised over a batch of states."""
    species = default_species(basis) if species is None else tuple(species)
    sites = default_sites(basis, species) if sites is None else tuple(sites)
    single = {s: subsystem_entropy(basis, states, [s], species) for s in sites}
    out = {}
    for i, j in itertools.combinations(sites, 2):
        s_ij = subsystem_entropy(basis, states, [i, j], species)
        out[(i, j)] = np.maximum(single[i] + single[j] - s_ij, 0.0)
    return out


def pairwise_mi_stats(basis: FockBasis, state: np.ndarray, species=None) -> MIStatistics:
    pairs = pairwise_mi(basis, np.asarray(state), species)
    return MIStatistics.from_pairs({k: float(v) for k, v in pairs.items()})


def mi_mean_std(pairs: dict) -> tuple[np.ndarray, np.ndarray]:
    vals = np.stack(list(pairs.values()))
    return vals.mean(axis=0), vals.std(axis=0)
