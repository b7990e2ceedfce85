import math

import numpy as np
import pytest
import scipy.linalg

from prethermal.charge import validate_charge
from prethermal.floquet import (RenormSchedule, apply_frame_step, build_A,
                                compute_constants, conjugate_grid,
                                diag_defect, frame_unitary,
                                gamma_alpha_bundle, run_floquet_renorm,
                                symmetrize_u1)
from prethermal.lattice import LocalOperator, chain_graph
from prethermal.potential import ColoredPotential, assemble_grid

SZ = np.diag([0.5, -0.5])
SX = np.array([[0.0, 1.0], [1.0, 0.0]]) / 2
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]]) / 2


def two_site_model():
    g = chain_graph(2)
    charge = validate_charge(
        [LocalOperator((i,), SZ.copy()) for i in g.sites], g)
    H = ColoredPotential(g, m=1)
    H._insert((0, 1), (0,), 0.3 * np.kron(SZ, SZ))
    H._insert((0, 1), (1,), 0.1 * (np.kron(SX, SX) + np.kron(SY, SY)))
    H._insert((0, 1), (-1,), 0.1 * (np.kron(SX, SX) + np.kron(SY, SY)))
    H._insert((0,), (1,), 0.08 * SX)
    H._insert((0,), (-1,), 0.08 * SX)
    return g, charge, H


# --- constants --------------------------------------------------------------

def test_constants_reference_values():
    c = compute_constants(1.0, 1e5, 1.0)
    # closed form should agree with an independent root-finder for its own
    # quadratic b1 x^2 * c1/... : check P_closed(x_closed) = 0
    b1 = 108 * math.pi + 4 * math.pi / math.e
    c1 = 288 * math.pi / math.e
    assert abs((c1 / 2) * c.x_closed ** 2 + b1 * c.x_closed - 0.5) < 1e-12
    assert c.x_closed == pytest.approx(1.4528e-3, rel=1e-3)
    assert c.x == min(c.x_closed, c.x_root, c.x_linear)
    assert c.n_star == 9
    assert c.admissible


def test_constants_root_solves_quadratic():
    for kappa0 in (0.5, 1.0, 2.0):
        c = compute_constants(kappa0, 10.0, 1.0)
        k1 = kappa0 / 2
        qa = 72 * math.pi * k1 / math.e
        qb = 108 * math.pi + 2 * math.pi * k1 / math.e
        assert abs(qa * c.x_root ** 2 + qb * c.x_root - 0.5) < 1e-12
        assert c.x_linear == pytest.approx(1 / (6 * math.pi * kappa0))


def test_inadmissible_ratio():
    c = compute_constants(1.0, 2.0, 1.0)
    assert not c.admissible
    assert c.n_star == 0


# --- building blocks --------------------------------------------------------

def test_symmetrize_u1_exact_split():
    g, charge, H = two_site_model()
    d, v = symmetrize_u1(H, charge)
    total = d + v
    theta = 0.7
    assert np.allclose(total.sample([theta]), H.sample([theta]), atol=1e-12)
    nmat = charge.matrix()
    dm = d.sample([theta])
    assert np.linalg.norm(nmat @ dm - dm @ nmat, 2) < 1e-12
    assert diag_defect(d, charge) < 1e-12


def test_build_A_solves_commutator_equation():
    g, charge, H = two_site_model()
    _, v = symmetrize_u1(H, charge)
    nu = 5.0
    a = build_A(v, nu, charge)
    nmat = charge.matrix()
    for theta in (0.0, 1.1, 2.9):
        am = a.sample([theta])
        vm = v.sample([theta])
        assert np.linalg.norm(nu * (nmat @ am - am @ nmat) + vm, 2) < 1e-11
        # antihermitian
        assert np.linalg.norm(am + am.conj().T, 2) < 1e-12


def test_build_A_rejects_zero_mode():
    g, charge, H = two_site_model()
    d, _ = symmetrize_u1(H, charge)
    with pytest.raises(ValueError):
        build_A(d, 1.0, charge)


def test_conjugate_grid_matches_expm():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
    a = 0.3 * (a - np.conj(np.swapaxes(a, -1, -2)))
    o = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
    got = conjugate_grid(a, o)
    for k in range(3):
        want = scipy.linalg.expm(-a[k]) @ o[k] @ scipy.linalg.expm(a[k])
        assert np.linalg.norm(got[k] - want, 2) < 1e-11


def test_alpha_filter_matches_quadrature():
    # independent oracle: high-order Gauss-Legendre quadrature of the
    # s-integral with explicit expm at each node
    rng = np.random.default_rng(5)
    a = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    a = 0.4 * (a - np.conj(np.swapaxes(a, -1, -2)))
    o = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    _, (got,) = gamma_alpha_bundle(a, [], [o])
    nodes, weights = np.polynomial.legendre.leggauss(40)
    s_vals = 0.5 * (nodes + 1.0)
    w_vals = 0.5 * weights
    for k in range(2):
        acc = np.zeros((4, 4), dtype=complex)
        for s, w in zip(s_vals, w_vals):
            acc += w * (scipy.linalg.expm(-s * a[k]) @ o[k]
                        @ scipy.linalg.expm(s * a[k]))
        assert np.linalg.norm(got[k] - acc, 2) < 1e-11


# --- full steps -------------------------------------------------------------

def test_frame_step_shrinks_V():
    g, charge, H = two_site_model()
    d0, v0 = symmetrize_u1(H, charge)
    nu, omega = 50.0, 1.0
    d1, v1, a, step = apply_frame_step(d0, v0, charge, nu, omega, 1.0, 0.9)
    assert step.halving_ok
    n0 = v0.kappa_norm(1.0)
    n1 = v1.kappa_norm(0.9) if v1.terms else 0.0
    assert n1 < 0.1 * n0
    assert diag_defect(d1, charge) < 1e-12


def test_renorm_decomposition_is_exact_frame_change():
    # strongest oracle: the renormalized generator conjugated back through
    # the frames must reproduce the original H(theta) exactly at every step
    g, charge, H = two_site_model()
    nu, omega = 40.0, 1.3
    sched = RenormSchedule(kappa0=1.0, mode="adaptive", max_steps=3,
                           grid_size=16)
    dec = run_floquet_renorm(charge, H, nu, omega, sched)
    assert dec.n_steps >= 2
    nmat = charge.matrix()
    for theta in (0.0, 0.8, 2.2, 4.0):
        f = frame_unitary(dec, [theta])
        gen_new = (nu * nmat + dec.D.sample([theta]) + dec.V.sample([theta]))
        gen_old = nu * nmat + H.sample([theta])
        # e^{-A} (G_old - i d/dt) e^{A}: check the algebraic residual through
        # the composed frames by finite differences of the frame itself
        eps = 1e-6
        fp = frame_unitary(dec, [theta + eps * omega])
        fm = frame_unitary(dec, [theta - eps * omega])
        dfdt = (fp - fm) / (2 * eps)
        resid = f.conj().T @ (gen_old @ f - 1j * dfdt) - gen_new
        assert np.linalg.norm(resid, 2) < 1e-4  # fd-limited


def test_rigorous_schedule_kappa_exhaustion():
    sched = RenormSchedule(kappa0=1.0, mode="rigorous")
    c = compute_constants(1.0, 1e5, 1.0)
    sched.constants = c
    ks = [sched.kappa(n) for n in range(c.n_star + 1)]
    assert ks[0] == 1.0
    assert all(k2 < k1 for k1, k2 in zip(ks[1:], ks[2:]))
    with pytest.raises(ValueError):
        sched.kappa(10 ** 6)


def test_rigorous_mode_rejects_small_ratio():
    g, charge, H = two_site_model()
    sched = RenormSchedule(kappa0=1.0, mode="rigorous")
    with pytest.raises(RuntimeError):
        run_floquet_renorm(charge, H, 2.0, 1.0, sched, nu0=1.0)
