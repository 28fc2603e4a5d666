import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockdyn.errors import SectorError
from fockdyn.fock import (FockConfiguration, apply_hop, enumerate_sector, fock_index,
                          parse_state)
from fockdyn.lattice import LatticeSpec, SpeciesSpec, build_model, ring_model

from oracles import annihilators


def _single(model, text):
    return parse_state(text, model)


def test_sector_dimensions(ring, phi_model):
    assert enumerate_sector(ring, (3, 3)).dim == math.comb(6, 3) ** 2 == 400
    assert enumerate_sector(phi_model, (3, 3, 1)).dim == 800
    vac = enumerate_sector(ring, (0, 0))
    assert vac.dim == 1
    assert vac.config(0).bits == (0, 0)


def test_counts_by_label(ring):
    assert enumerate_sector(ring, {"tau": 2, "ups": 1}).counts == (2, 1)


@pytest.mark.parametrize("counts", [(7, 0), (-1, 0), (3,)])
def test_counts_out_of_range(ring, counts):
    with pytest.raises(SectorError):
        enumerate_sector(ring, counts)


@pytest.mark.parametrize("n_sites, counts", [
    (2, (1, 1)), (3, (1, 2)), (4, (2, 2)), (5, (2, 3)), (6, (3, 3)), (6, (1, 4)),
])
def test_dimension_against_filtered_enumeration(n_sites, counts):
    """Filter all 2**modes bitstrings and compare the sorted result."""
    m = ring_model(n_sites, 1.0, 0.0) if n_sites > 2 else None
    if m is None:
        m = build_model(LatticeSpec(2, ((0, 1),)), [SpeciesSpec("tau"), SpeciesSpec("ups")])
    basis = enumerate_sector(m, counts)
    modes = 2 * n_sites
    strings = []
    for bits in itertools.product("01", repeat=modes):
        s = "".join(bits)
        if s[:n_sites].count("1") == counts[0] and s[n_sites:].count("1") == counts[1]:
            strings.append(s)
    assert basis.dim == len(strings) == math.comb(n_sites, counts[0]) * math.comb(n_sites, counts[1])
    ours = ["".join(c.to_string(m).replace(" x ", "").replace("|", "").replace(">_tau", "")
                    .replace(">_ups", "")) for c in basis]
    assert ours == sorted(strings)


def test_first_configuration_has_index_zero(sector):
    assert fock_index(sector, sector.config(0)) == 0
    assert sector.config(0).bits == (0b111000, 0b111000)  # |000111>|000111>


def test_index_round_trip(sector):
    for k in range(sector.dim):
        assert fock_index(sector, sector.config(k)) == k


def test_paper_initial_state_index(ring, sector):
    # oracle: enumerate C(6,3)^2 strings, sort, search
    strings = sorted(a + b for a in _strings(6, 3) for b in _strings(6, 3))
    expected = strings.index("111000" + "111000")
    assert expected == 399
    assert fock_index(sector, parse_state("|111000>_tau x |111000>_ups", ring)) == 399


def _strings(n, k):
    return ["".join("1" if i in c else "0" for i in range(n)) for c in itertools.combinations(range(n), k)]


def test_config_outside_sector(ring, sector):
    with pytest.raises(SectorError, match="not in sector"):
        fock_index(sector, parse_state("|110000>_tau x |111000>_ups", ring))


def test_parse_state_variants(phi_model):
    c = parse_state("|111000>_tau x |111000>_ups x |10>_phi", phi_model)
    assert c.occupied("phi", 1) and not c.occupied("phi", 6)
    full = parse_state("|1110000>_tau x |1110000>_ups x |0100000>_phi", phi_model)
    assert full == c
    with pytest.raises(SectorError):
        parse_state("|111>_tau", phi_model)
    with pytest.raises(SectorError):
        parse_state("|1110001>_tau", phi_model)  # tau cannot reach the auxiliary site


def test_to_string_round_trip(phi_model):
    text = "|101010>_tau x |010101>_ups x |01>_phi"
    assert parse_state(text, phi_model).to_string(phi_model) == text


# --- hopping signs ----------------------------------------------------------

def _brute_hop(bits_string, a, b):
    """c+_b c_a on a single species of len(bits_string) modes via explicit matrices."""
    n = len(bits_string)
    cs = annihilators(n)
    idx = int(bits_string, 2)
    v = np.zeros(2 ** n)
    v[idx] = 1.0
    w = cs[b].T @ (cs[a] @ v)
    nz = np.flatnonzero(w)
    if not len(nz):
        return None
    (j,) = nz
    return format(j, f"0{n}b"), int(np.sign(w[j]))


def _cfg(model, tau, ups="000000"):
    return parse_state(f"|{tau}>_tau x |{ups}>_ups", model)


def test_adjacent_hop(ring):
    new, sign = apply_hop(_cfg(ring, "110000"), "tau", 1, 2)
    assert new == _cfg(ring, "101000") and sign == 1


def test_long_hop_matches_brute_force(ring):
    new, sign = apply_hop(_cfg(ring, "110100"), "tau", 0, 4)
    assert _brute_hop("110100", 0, 4) == ("010110", 1)
    assert new == _cfg(ring, "010110") and sign == 1


def test_hop_from_empty_site_annihilates(ring):
    assert apply_hop(_cfg(ring, "010000"), "tau", 0, 1) is None
    assert apply_hop(_cfg(ring, "110000"), "tau", 0, 1) is None  # target occupied


def test_other_species_contributes_no_sign(ring):
    new, sign = apply_hop(_cfg(ring, "100000", "111111"), "tau", 0, 5)
    assert sign == 1
    assert new == _cfg(ring, "000001", "111111")


@pytest.mark.parametrize("occ", ["100011", "101101", "110001", "111001", "100111", "110101"])
def test_boundary_hop_sign(ring, occ):
    """The closing bond 5 -> 0 crosses modes 1..4."""
    got = apply_hop(_cfg(ring, occ), "tau", 5, 0)
    expected = _brute_hop(occ, 5, 0)
    if expected is None:
        assert got is None
    else:
        assert (got[0], got[1]) == (_cfg(ring, expected[0]), expected[1])


@settings(max_examples=200, deadline=None)
@given(occ=st.integers(0, 63), a=st.integers(0, 5), b=st.integers(0, 5))
def test_any_hop_matches_brute_force(occ, a, b):
    ring = ring_model(6, 1.0, 0.0)
    s = format(occ, "06b")
    got = apply_hop(_cfg(ring, s), "tau", a, b)
    if a == b:
        return
    expected = _brute_hop(s, a, b)
    if expected is None:
        assert got is None
    else:
        assert got == (_cfg(ring, expected[0]), expected[1])


def test_hop_and_back_restores_state_with_plus_sign(ring, sector):
    for cfg in sector:
        for i, j in ring.lattice.edges:
            for lab in ring.labels:
                r = apply_hop(cfg, lab, i, j)
                if r is None:
                    continue
                back = apply_hop(r[0], lab, j, i)
                assert back[0] == cfg
                assert r[1] * back[1] == 1


def test_configuration_is_immutable(sector):
    c = sector.config(3)
    assert isinstance(c, FockConfiguration)
    with pytest.raises(Exception):
        c.bits = (0, 0)
