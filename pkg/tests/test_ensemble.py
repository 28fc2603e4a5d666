import itertools
from math import comb

import numpy as np
import pytest

from fockdyn.ensemble import (EnsembleSpec, ensemble_density, ensemble_mutual_information,
                              ensemble_reduced, ensemble_subsystem_entropy, omega)
from fockdyn.errors import ConfigError


def hypergeometric_entropy(L, n, m):
    """Entropy of m sites of one species when n of L sites are filled uniformly."""
    total = comb(L, n)
    S = 0.0
    for k in range(0, min(m, n) + 1):
        p = comb(L - m, n - k) / total  # one specific pattern with k particles in the block
        if p > 0:
            S -= comb(m, k) * p * np.log(p)
    return S


def test_hypergeometric_oracle_values():
    pair = 2 * hypergeometric_entropy(6, 3, 1) - hypergeometric_entropy(6, 3, 2)
    assert pair == pytest.approx(0.020136, abs=1e-6)
    assert 2 * pair == pytest.approx(0.040272, abs=1e-6)
    assert 2 * hypergeometric_entropy(6, 3, 3) == pytest.approx(4.013962, abs=1e-6)


def test_sector_uniform_mi_all_pairs(sector):
    spec = EnsembleSpec("sector_uniform")
    expected = 2 * (2 * hypergeometric_entropy(6, 3, 1) - hypergeometric_entropy(6, 3, 2))
    for i, j in itertools.combinations(range(6), 2):
        assert ensemble_mutual_information(sector, spec, i, j) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5, 6])
def test_sector_uniform_entropies(sector, m):
    spec = EnsembleSpec("sector_uniform")
    S = ensemble_subsystem_entropy(sector, spec, list(range(m)))
    assert S == pytest.approx(2 * hypergeometric_entropy(6, 3, m), abs=1e-10)


def test_sector_uniform_full_state(sector):
    spec = EnsembleSpec("sector_uniform")
    assert omega(sector, None, spec) == 400
    rho = ensemble_density(sector, None, spec)
    assert np.allclose(rho.matrix, np.eye(400) / 400)
    assert ensemble_subsystem_entropy(sector, spec, range(6)) == pytest.approx(np.log(400))


def test_energy_window(sector, eig, psi0):
    E0 = eig.energy(psi0)
    assert E0 == pytest.approx(-0.15, abs=1e-12)
    spec = EnsembleSpec("energy_window", E0, 0.5)
    n = omega(sector, eig, spec)
    assert n == int(np.sum(np.abs(eig.energies - E0) <= 0.5))
    rho = ensemble_reduced(sector, eig, spec, [0])
    assert rho.trace() == pytest.approx(1.0)
    mi = ensemble_mutual_information(sector, spec, 0, 1, eig)
    assert mi >= 0


def test_energy_window_limits(sector, eig):
    wide = EnsembleSpec("energy_window", 0.0, 1e6)
    assert omega(sector, eig, wide) == 400
    uni = EnsembleSpec("sector_uniform")
    assert ensemble_subsystem_entropy(sector, wide, [0, 1], eig) == pytest.approx(
        ensemble_subsystem_entropy(sector, uni, [0, 1]), abs=1e-10)
    # zero width around a nondegenerate level: a single eigenstate
    E = eig.energies
    gaps = np.diff(E)
    k = int(np.argmax(np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])))
    single = EnsembleSpec("energy_window", float(E[k]), 0.0)
    assert omega(sector, eig, single) == 1
    with pytest.raises(ConfigError):
        omega(sector, eig, EnsembleSpec("energy_window", 1e3, 0.1))


def test_spec_validation(sector):
    with pytest.raises(ConfigError):
        EnsembleSpec("canonical")
    with pytest.raises(ConfigError):
        EnsembleSpec("energy_window")
    with pytest.raises(ConfigError):
        EnsembleSpec("energy_window", 0.0, -1.0)
    with pytest.raises(ConfigError):
        omega(sector, None, EnsembleSpec("energy_window", 0.0))
