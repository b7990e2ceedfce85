import numpy as np
import pytest

from prethermal.lattice import chain_graph
from prethermal.potential import (ColoredPotential, GridOperatorFamily,
                                  assemble_grid, decompose_to_potential,
                                  site_basis)

SX = np.array([[0.0, 1.0], [1.0, 0.0]]) / 2
SZ = np.diag([0.5, -0.5])


def test_site_basis_orthonormal():
    for d in (2, 3):
        b = site_basis(d)
        assert len(b) == d * d
        gram = np.einsum("aij,bji->ab", b.conj().transpose(0, 2, 1), b)
        assert np.allclose(gram, np.eye(d * d), atol=1e-12)
        for m in b:
            assert np.allclose(m, m.conj().T)
        # identity first, rest traceless
        assert np.allclose(b[0], np.eye(d) / np.sqrt(d))
        for m in b[1:]:
            assert abs(np.trace(m)) < 1e-12


def two_site_pot():
    g = chain_graph(2)
    pot = ColoredPotential(g, m=1)
    pot._insert((0, 1), (0,), 0.7 * np.kron(SZ, SZ))
    pot._insert((0,), (1,), 0.3 * SX)
    pot._insert((0,), (-1,), 0.3 * SX)
    return g, pot


def test_kappa_norm_hand_value():
    g, pot = two_site_pot()
    k = 0.5
    # site 0 carries all three terms
    want = (np.exp(k * 2) * 0.7 * 0.25
            + 2 * np.exp(k * 2) * 0.15)
    assert pot.kappa_norm(k) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        pot.kappa_norm(0.0)


def test_sample_matches_modes():
    g, pot = two_site_pot()
    theta = 0.9
    direct = pot.sample([theta])
    want = (0.7 * np.kron(SZ, SZ)
            + 2 * np.cos(theta) * 0.3 * np.kron(SX, np.eye(2)))
    assert np.allclose(direct, want, atol=1e-12)


def test_grid_round_trip():
    g, pot = two_site_pot()
    fam = assemble_grid(pot, (8,))
    back = decompose_to_potential(fam, g, verify=True)
    resid = (assemble_grid(back, (8,)) - fam).max_norm()
    assert resid < 1e-12
    # term content identical
    assert set(back.terms) == set(pot.terms)
    for key in pot.terms:
        assert np.allclose(back.terms[key], pot.terms[key], atol=1e-12)


def test_grid_too_small_rejected():
    g, pot = two_site_pot()
    with pytest.raises(ValueError):
        assemble_grid(pot, (2,))


def test_scalars_round_trip():
    g = chain_graph(2)
    pot = ColoredPotential(g, m=1, scalars={(1,): 0.2, (-1,): 0.2})
    fam = assemble_grid(pot, (8,))
    back = decompose_to_potential(fam, g)
    assert not back.terms
    assert back.scalars[(1,)] == pytest.approx(0.2, abs=1e-13)
    assert back.kappa_norm(1.0) == 0.0  # scalars carry no locality weight


def test_theta_derivative():
    g, pot = two_site_pot()
    dpot = pot.theta_derivative(0)
    eps = 1e-6
    theta = 1.3
    fd = (pot.sample([theta + eps]) - pot.sample([theta - eps])) / (2 * eps)
    assert np.allclose(dpot.sample([theta]), fd, atol=1e-8)


def test_hermiticity_defect():
    g, pot = two_site_pot()
    assert pot.hermiticity_defect() < 1e-14
    bad = ColoredPotential(g, m=1)
    bad._insert((0,), (1,), SX)   # unpaired mode: not pointwise Hermitian
    assert bad.hermiticity_defect() > 0.1


def test_disconnected_zone_reassigned():
    g = chain_graph(3)
    pot = ColoredPotential(g, m=1)
    pot._insert((0, 2), (0,), np.kron(SZ, SZ))
    (zone, _), = pot.terms.keys()
    assert zone == (0, 1, 2)
    # embedding unchanged
    fam = assemble_grid(pot, (4,))
    direct = ColoredPotential(g, m=1)
    direct._insert((0, 1, 2), (0,), np.kron(np.kron(SZ, np.eye(2)), SZ))
    assert (fam - assemble_grid(direct, (4,))).max_norm() < 1e-12


def test_max_mode_and_prune():
    g, pot = two_site_pot()
    assert pot.max_mode() == 1
    tiny = pot + pot.scaled(-1.0)
    assert tiny.pruned().is_zero()


def test_noise_floor_prunes_roundoff():
    g, pot = two_site_pot()
    fam = assemble_grid(pot, (16,))
    noisy = GridOperatorFamily(
        fam.samples + 1e-14 * np.ones_like(fam.samples), 1,
        noise_floor=1e-12)
    back = decompose_to_potential(noisy, g)
    assert back.max_mode() <= 1
