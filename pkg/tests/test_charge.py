import numpy as np
import pytest
import scipy.linalg

from prethermal.charge import (ChargeValidationError, ad_charge_decompose,
                               charge_matrix, dress_charge, group_generator,
                               mode_project, validate_charge)
from prethermal.lattice import LocalOperator, chain_graph, embed_operator

SZ = np.diag([0.5, -0.5])
SX = np.array([[0.0, 1.0], [1.0, 0.0]]) / 2
SP = np.array([[0.0, 1.0], [0.0, 0.0]])


def site_charge(g):
    return validate_charge([LocalOperator((i,), SZ.copy()) for i in g.sites], g)


def test_validate_site_charge():
    g = chain_graph(3)
    c = site_charge(g)
    assert c.range_R == 1
    assert c.term_bound == pytest.approx(0.5)
    assert c.integer_spacings
    # half-integer eigenvalues: integer after a uniform 1/2 shift
    assert c.integer_spectrum


def test_noncommuting_terms_rejected():
    g = chain_graph(2)
    terms = [LocalOperator((0,), SZ), LocalOperator((0, 1), np.kron(SX, SX))]
    with pytest.raises(ChargeValidationError):
        validate_charge(terms, g)


def test_nonhermitian_term_rejected():
    g = chain_graph(1)
    with pytest.raises(ChargeValidationError):
        validate_charge([LocalOperator((0,), SP)], g)


def test_noninteger_spacing_rejected():
    g = chain_graph(1)
    with pytest.raises(ChargeValidationError):
        validate_charge([LocalOperator((0,), np.diag([0.0, 0.3]))], g)


def test_charge_matrix_total_sz():
    g = chain_graph(2)
    n = charge_matrix(site_charge(g))
    want = np.kron(2 * SZ, np.eye(2)) / 2 + np.kron(np.eye(2), 2 * SZ) / 2
    assert np.allclose(n, want)


def test_ad_decompose_reconstructs_and_grades():
    g = chain_graph(3)
    charge = site_charge(g)
    rng = np.random.default_rng(7)
    mat = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    op = LocalOperator((0, 1), mat)
    comps = ad_charge_decompose(op, charge)
    nfull = charge_matrix(charge)
    total = sum(embed_operator(c, g) for c in comps.values())
    assert np.allclose(total, embed_operator(op, g), atol=1e-12)
    for m, comp in comps.items():
        cm = embed_operator(comp, g)
        assert np.allclose(nfull @ cm - cm @ nfull, m * cm, atol=1e-10)


def test_mode_project_zero_mode():
    g = chain_graph(2)
    charge = site_charge(g)
    op = LocalOperator((0,), SX)  # purely off-diagonal: zero m=0 part
    p0 = mode_project(op, charge, 0)
    assert np.linalg.norm(p0.matrix) < 1e-12
    pz = mode_project(LocalOperator((0,), SZ), charge, 0)
    assert np.linalg.norm(embed_operator(pz, g)
                          - embed_operator(LocalOperator((0,), SZ), g)) < 1e-12


def test_group_generator_order():
    g = chain_graph(2)
    charge = site_charge(g)
    for n in (2, 3):
        gen = group_generator(charge, n)
        gn = np.linalg.matrix_power(gen, n)
        phase = gn[0, 0] / abs(gn[0, 0])
        assert np.allclose(gn, phase * np.eye(4), atol=1e-10)
        # g commutes with N
        nmat = charge_matrix(charge)
        assert np.linalg.norm(gen @ nmat - nmat @ gen) < 1e-10


def test_dress_charge_is_conjugation():
    g = chain_graph(2)
    charge = site_charge(g)
    rng = np.random.default_rng(3)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = h - h.conj().T
    dressed = dress_charge(charge, a)
    want = scipy.linalg.expm(a) @ charge_matrix(charge) @ scipy.linalg.expm(-a)
    assert np.allclose(dressed, want, atol=1e-12)
    with pytest.raises(ValueError):
        dress_charge(charge, h + h.conj().T)  # hermitian, not antihermitian
