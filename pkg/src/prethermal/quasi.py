"""Frame renormalization with an emergent Z_n symmetry (two-tone drives).

The fast tone enters through the charge itself: the generator is
(nu/n) N + H(theta1, theta2) with theta1 flowing at nu.  Passing to the
rotating frame of (nu/n) N and rescaling u = theta1/n turns the problem into
a single effective family H~(u, theta2) that is *twist-periodic*,

    H~(u + 2 pi / n) = g H~(u) g^dag,      g = exp(i 2 pi N / n),

and the renormalization now targets the u-dependence instead of the charge
off-diagonal part: D holds the u-zero-modes (hence commutes with g), frames
e^{B_k} remove the rest.  Every step certifies the twist covariance, the
theta1-independence of D, [D, g], and the 2 pi periodicity of the composed
lab frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .charge import ChargeOperator, ad_charge_decompose, group_generator
from .floquet import (DEFAULT_GRID, RenormSchedule, _stable_decompose,
                      compute_constants, gamma_alpha_bundle)
from .lattice import LocalOperator
from .potential import ColoredPotential, GridOperatorFamily, assemble_grid

__all__ = [
    "QuasiStep",
    "QuasiDecomposition",
    "rotating_frame_potential",
    "twist_residual",
    "symmetrize_theta1",
    "build_B",
    "apply_quasi_step",
    "run_quasi_renorm",
    "quasi_frame_unitary",
    "lab_frame_unitary",
    "lab_frame_periodicity_residual",
]


def rotating_frame_potential(H: ColoredPotential, charge: ChargeOperator,
                             n: int) -> ColoredPotential:
    """Conjugate by e^{i theta1 N / n} and rescale u = theta1 / n, termwise.

    A term with drive modes (n1, n2) and charge-mode component m lands on
    the exact integer u-mode p = n*n1 + m; no grid is involved.
    """
    if H.m != 2:
        raise ValueError("two-tone potential required (m = 2)")
    out = ColoredPotential(H.graph, m=2)
    for (zone, nvec), matrix in sorted(H.terms.items()):
        n1, n2 = nvec
        comps = ad_charge_decompose(LocalOperator(zone, matrix), charge)
        for m, comp in sorted(comps.items()):
            out._insert(comp.support, (n * n1 + m, n2), comp.matrix)
    for (n1, n2), c in sorted(H.scalars.items()):
        out.scalars[(n * n1, n2)] = out.scalars.get((n * n1, n2), 0.0) + c
    return out.pruned()


def twist_residual(pot: ColoredPotential, charge: ChargeOperator, n: int,
                   grid_shape=None) -> float:
    """max_theta || H~(u + 2 pi/n, th2) - g H~(u, th2) g^dag ||.

    Grid-exact: the u-grid size is a multiple of n so the shift is a roll.
    """
    if pot.is_zero():
        return 0.0
    if grid_shape is None:
        nmodes = pot.max_mode()
        n1 = n
        while n1 < 2 * nmodes + 2 or n1 < 2 * n:
            n1 *= 2
        n2 = 8
        while n2 < 2 * nmodes + 2:
            n2 *= 2
        grid_shape = (n1, n2)
    if grid_shape[0] % n:
        raise ValueError("u-grid size must be divisible by n")
    g = group_generator(charge, n)
    samples = assemble_grid(pot, grid_shape).samples
    shifted = np.roll(samples, -grid_shape[0] // n, axis=0)
    twisted = np.einsum("ab,...bc,cd->...ad", g, samples, g.conj().T)
    return float(np.linalg.norm(shifted - twisted, 2, axis=(-2, -1)).max())


def symmetrize_theta1(pot: ColoredPotential):
    """Split into the u-zero-mode part D and the rest V (exact, termwise)."""
    d_pot = ColoredPotential(pot.graph, m=pot.m)
    v_pot = ColoredPotential(pot.graph, m=pot.m)
    for (zone, nvec), matrix in sorted(pot.terms.items()):
        target = d_pot if nvec[0] == 0 else v_pot
        target._insert(zone, nvec, matrix)
    for nvec, c in sorted(pot.scalars.items()):
        target = d_pot if nvec[0] == 0 else v_pot
        target.scalars[nvec] = target.scalars.get(nvec, 0.0) + c
    return d_pot.pruned(), v_pot.pruned()


def build_B(V: ColoredPotential, nu: float, n: int) -> ColoredPotential:
    """Antiderivative frame generator: B^(p) = -(n / (nu p)) V^(p), p != 0,
    so that -i (nu/n) dB/du = -V."""
    out = ColoredPotential(V.graph, m=V.m)
    for (zone, nvec), matrix in sorted(V.terms.items()):
        p = nvec[0]
        if p == 0:
            raise ValueError("V passed to build_B has a u-zero-mode term")
        out._insert(zone, nvec, -(n / (nu * p)) * matrix)
    for nvec, c in sorted(V.scalars.items()):
        if nvec[0] == 0:
            raise ValueError("V passed to build_B has a u-zero-mode scalar")
        out.scalars[nvec] = out.scalars.get(nvec, 0.0) - (n / (nu * nvec[0])) * c
    return out


@dataclass
class QuasiStep:
    index: int
    kappa: float
    kappa_next: float
    norm_D: float
    norm_V: float
    norm_B: float
    hypothesis_ok: bool
    halving_ok: bool
    twist_residual: float
    theta1_variation: float
    commutant_residual: float
    extra: dict = field(default_factory=dict)


@dataclass
class QuasiDecomposition:
    charge: ChargeOperator
    n: int
    nu: float
    omega: float
    nu0: float
    frames: list               # B_k ColoredPotentials in (u, theta2)
    D: ColoredPotential
    V: ColoredPotential
    steps: list
    kappa_final: float
    mode: str
    constants: object
    H_rotating: ColoredPotential

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def _kill_hermitian_defect(pot: ColoredPotential) -> ColoredPotential:
    """Restore exact pointwise Hermiticity (pairs (Z, n) <-> (Z, -n))."""
    out = ColoredPotential(pot.graph, m=pot.m)
    for (zone, nvec), matrix in sorted(pot.terms.items()):
        neg = tuple(-x for x in nvec)
        partner = pot.terms.get((zone, neg))
        if partner is None:
            half = 0.5 * matrix
            out._insert(zone, nvec, half)
            out._insert(zone, neg, half.conj().T)
        else:
            out._insert(zone, nvec, 0.5 * (matrix + partner.conj().T))
    for nvec, c in sorted(pot.scalars.items()):
        neg = tuple(-x for x in nvec)
        cc = np.conj(pot.scalars.get(neg, 0.0))
        out.scalars[nvec] = out.scalars.get(nvec, 0.0) + 0.5 * (c + cc)
    return out.pruned()


def _quasi_w_sampler(D, V, B, dB2, omega):
    def sampler(grid_shape):
        d_g = assemble_grid(D, grid_shape).samples if not D.is_zero() else 0.0
        v_g = assemble_grid(V, grid_shape).samples
        b_g = assemble_grid(B, grid_shape).samples
        db_g = (assemble_grid(dB2, grid_shape).samples
                if not dB2.is_zero() else np.zeros_like(v_g))
        gamma_in = ([d_g] if np.ndim(d_g) else []) + [v_g]
        gammas, alphas = gamma_alpha_bundle(b_g, gamma_in, [v_g, db_g])
        gam_v = gammas[-1]
        gam_d = gammas[0] if len(gammas) > 1 else 0.0
        alp_v, alp_db = alphas
        w = (gam_d - d_g) + (gam_v - v_g) + (v_g - alp_v) - 1j * omega * alp_db
        in_scale = max(np.abs(d_g).max() if np.ndim(d_g) else 0.0,
                       np.abs(v_g).max(),
                       abs(omega) * np.abs(db_g).max(), 1e-300)
        return GridOperatorFamily(np.asarray(w), 2,
                                  noise_floor=1e-13 * in_scale)
    return sampler


def _quasi_grid_shape(pots, n: int, base: int):
    maxmode = max((p.max_mode() for p in pots), default=0)
    n1 = n
    while n1 < base or n1 < 2 * maxmode + 2:
        n1 *= 2
    n2 = 8
    while n2 < 2 * maxmode + 2:
        n2 *= 2
    return (n1, n2)


def apply_quasi_step(D, V, charge: ChargeOperator, nu: float, omega: float,
                     n: int, kappa_n: float, kappa_next: float,
                     grid_base: int = DEFAULT_GRID, rigorous: bool = False):
    """One Z_n frame step; returns (D_next, V_next, B, step_record)."""
    norm_v = V.kappa_norm(kappa_n) if V.terms else 0.0
    norm_d = D.kappa_norm(kappa_n) if D.terms else 0.0
    nu_eff = nu / n
    hypothesis_ok = 6 * np.pi * norm_v / nu_eff < (kappa_n - kappa_next)
    if rigorous and not hypothesis_ok:
        raise RuntimeError(
            f"step hypothesis violated: 6 pi ||V|| n/nu = "
            f"{6 * np.pi * norm_v / nu_eff:.3e} >= {kappa_n - kappa_next:.3e}")
    if not V.terms and not V.scalars:
        b = ColoredPotential(V.graph, m=V.m)
        step = QuasiStep(index=-1, kappa=kappa_n, kappa_next=kappa_next,
                         norm_D=norm_d, norm_V=0.0, norm_B=0.0,
                         hypothesis_ok=True, halving_ok=True,
                         twist_residual=twist_residual(D, charge, n),
                         theta1_variation=0.0,
                         commutant_residual=_commutant_residual(D, charge, n))
        return D, ColoredPotential(V.graph, m=V.m), b, step
    b = build_B(V, nu, n)
    db2 = b.theta_derivative(1)
    sampler = _quasi_w_sampler(D, V, b, db2, omega)
    shape0 = _quasi_grid_shape([D, V, b], n, grid_base)
    w_pot, _ = _stable_decompose(sampler, V.graph, shape0, kappa_next)
    w_pot = _kill_hermitian_defect(w_pot)
    diag_w, off_w = symmetrize_theta1(w_pot)
    d_next = (D + diag_w).pruned()
    v_next = off_w.pruned()
    norm_w = w_pot.kappa_norm(kappa_next) if w_pot.terms else 0.0
    noise = 1e-13 * max(norm_d, 1.0)
    halving_ok = norm_w <= 0.5 * norm_v + noise
    step = QuasiStep(
        index=-1, kappa=kappa_n, kappa_next=kappa_next,
        norm_D=norm_d, norm_V=norm_v,
        norm_B=b.kappa_norm(kappa_n) if b.terms else 0.0,
        hypothesis_ok=bool(hypothesis_ok), halving_ok=bool(halving_ok),
        twist_residual=max(twist_residual(d_next, charge, n),
                           twist_residual(v_next, charge, n)),
        theta1_variation=_theta1_variation(d_next, kappa_next),
        commutant_residual=_commutant_residual(d_next, charge, n))
    return d_next, v_next, b, step


def _theta1_variation(D: ColoredPotential, kappa: float) -> float:
    """kappa-norm of the u-dependent content of D (zero by construction)."""
    _, rest = symmetrize_theta1(D)
    return rest.kappa_norm(kappa) if (rest.terms or rest.scalars) else 0.0


def _commutant_residual(D: ColoredPotential, charge: ChargeOperator,
                        n: int) -> float:
    """max over a theta2 sweep of ||[D(theta2), g]||."""
    if D.is_zero():
        return 0.0
    g = group_generator(charge, n)
    worst = 0.0
    for th2 in np.linspace(0.0, 2 * np.pi, 9, endpoint=False):
        d = D.sample([0.0, th2])
        worst = max(worst, float(np.linalg.norm(d @ g - g @ d, 2)))
    return worst


def run_quasi_renorm(charge: ChargeOperator, H: ColoredPotential, nu: float,
                     omega: float, n: int, schedule: RenormSchedule,
                     nu0: float | None = None) -> QuasiDecomposition:
    """Iterate Z_n frame steps on the rotated, rescaled two-tone family."""
    if n < 2:
        raise ValueError("twist order n must be >= 2")
    if nu <= 0:
        raise ValueError("nu must be positive")
    if nu0 is None:
        nu0 = max(2 * H.kappa_norm(schedule.kappa0), omega)
    # effective fast frequency after the rescale is nu / n
    constants = compute_constants(schedule.kappa0, nu / n, nu0)
    schedule.constants = constants
    if schedule.mode == "rigorous" and not constants.admissible:
        raise RuntimeError(
            f"nu/(n nu0) = {constants.nu_ratio:.3g} below admissibility "
            f"threshold C = {constants.C:.3g}")
    h_rot = rotating_frame_potential(H, charge, n)
    d_cur, v_cur = symmetrize_theta1(h_rot)
    frames, steps = [], []
    n_target = constants.n_star if schedule.mode == "rigorous" else schedule.max_steps
    kappa_n = schedule.kappa(0)
    k = 0
    while k < n_target:
        kappa_next = schedule.kappa(k + 1, constants)
        d_next, v_next, b, step = apply_quasi_step(
            d_cur, v_cur, charge, nu, omega, n, kappa_n, kappa_next,
            grid_base=schedule.grid_size,
            rigorous=(schedule.mode == "rigorous"))
        step.index = k
        if schedule.mode == "adaptive":
            nv_next = v_next.kappa_norm(kappa_next) if v_next.terms else 0.0
            nv_cur = v_cur.kappa_norm(kappa_n) if v_cur.terms else 0.0
            if nv_cur > 0 and nv_next >= nv_cur:
                break
        frames.append(b)
        steps.append(step)
        d_cur, v_cur = d_next, v_next
        kappa_n = kappa_next
        k += 1
        if schedule.mode == "adaptive" and not v_cur.terms:
            break
    return QuasiDecomposition(
        charge=charge, n=n, nu=nu, omega=omega, nu0=nu0, frames=frames,
        D=d_cur, V=v_cur, steps=steps, kappa_final=kappa_n,
        mode=schedule.mode, constants=constants, H_rotating=h_rot)


def quasi_frame_unitary(dec: QuasiDecomposition, u: float,
                        theta2: float) -> np.ndarray:
    """Composed rotating-frame change of basis e^{B_0} e^{B_1} ... at (u, th2)."""
    dim = dec.charge.graph.full_dim
    out = np.eye(dim, dtype=complex)
    for b in dec.frames:
        if b.is_zero():
            continue
        out = out @ scipy.linalg.expm(b.sample([u, theta2]))
    return out


def lab_frame_unitary(dec: QuasiDecomposition, theta1: float,
                      theta2: float) -> np.ndarray:
    """e^{A(theta)} = e^{-i theta1 N/n} F_B(theta1/n, theta2) e^{i theta1 N/n}."""
    nmat = dec.charge.matrix()
    w, vmat = np.linalg.eigh(nmat)
    rot = (vmat * np.exp(-1j * theta1 * w / dec.n)) @ vmat.conj().T
    f = quasi_frame_unitary(dec, theta1 / dec.n, theta2)
    return rot @ f @ rot.conj().T


def lab_frame_periodicity_residual(dec: QuasiDecomposition,
                                   nsamples: int = 8) -> float:
    """max || e^{A(theta1 + 2 pi, th2)} - e^{A(theta1, th2)} || over a sweep."""
    rng_angles = np.linspace(0.0, 2 * np.pi, nsamples, endpoint=False)
    worst = 0.0
    for th1 in rng_angles:
        for th2 in rng_angles[::2]:
            a0 = lab_frame_unitary(dec, th1, th2)
            a1 = lab_frame_unitary(dec, th1 + 2 * np.pi, th2)
            worst = max(worst, float(np.linalg.norm(a1 - a0, 2)))
    return worst


def reconstruct_quasi_propagator(dec: QuasiDecomposition, spec, t,
                                 dt: float = None):
    """Lab-frame identity check: U(t) = R(t) F_B(u_t) X(t) F_B(u_0)^dag R(0)^dag
    with X generated by the renormalized (D + V)(u_s, theta2_s)."""
    from .dynamics import compile_sampler, default_dt, propagate_generator
    if dt is None:
        dt = default_dt(spec)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    d_s = compile_sampler(dec.D)
    v_s = compile_sampler(dec.V)
    th0 = np.asarray(spec.theta0)

    def angles(s):
        return ((dec.nu * s + th0[0]) / dec.n, spec.omega * s + th0[1])

    def gen(s):
        u, th2 = angles(s)
        return d_s((u, th2)) + v_s((u, th2))

    ys, _ = propagate_generator(gen, times[-1], dt, sample_times=times,
                                dim=dec.charge.graph.full_dim)
    nmat = dec.charge.matrix()
    w, vmat = np.linalg.eigh(nmat)

    def rot(theta1):
        return (vmat * np.exp(-1j * theta1 * w / dec.n)) @ vmat.conj().T

    u0, th20 = angles(0.0)
    left0 = rot(th0[0]) @ quasi_frame_unitary(dec, u0, th20)
    out = []
    for ti, y in zip(times, ys):
        u, th2 = angles(ti)
        ft = rot(dec.nu * ti + th0[0]) @ quasi_frame_unitary(dec, u, th2)
        out.append(ft @ y @ left0.conj().T)
    if np.ndim(t) == 0:
        return out[0]
    return out
