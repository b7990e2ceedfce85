"""Iterative frame renormalization for driven Hamiltonians nu*N + H(theta).

Each step conjugates by exp(A_n(theta)) chosen so the charge-off-diagonal
part V_n is suppressed by ~nu0/nu.  Two schedules: "rigorous" (the explicit
decay-constant sequence and step count n_star derived from the constants
below) and "adaptive" (geometric kappa decay, stop when V stops shrinking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charge import ChargeOperator, ad_charge_decompose
from .potential import (ALIAS_TOL, ColoredPotential, GridOperatorFamily,
                        assemble_grid, decompose_to_potential)

__all__ = [
    "Constants",
    "RenormSchedule",
    "RenormStep",
    "EffectiveDecomposition",
    "compute_constants",
    "symmetrize_u1",
    "build_A",
    "apply_frame_step",
    "run_floquet_renorm",
    "frame_unitary",
]

QUAD_TOL = 1e-11
DEFAULT_GRID = 64


@dataclass(frozen=True)
class Constants:
    """Admissibility constants for the rigorous schedule."""

    kappa0: float
    A: float
    x_closed: float     # closed form quoted with the theorem
    x_root: float       # positive root of the quadratic P(x')
    x_linear: float     # 1 / (6 pi kappa0)
    x: float            # min of the three (the closed form and P disagree
                        # by constant factors; we keep the smaller)
    B: float
    C: float
    nu_ratio: float     # nu / nu0
    n_star: int
    admissible: bool


def compute_constants(kappa0: float, nu: float, nu0: float) -> Constants:
    if kappa0 <= 0 or nu0 <= 0:
        raise ValueError("kappa0 and nu0 must be positive")
    e = math.e
    pi = math.pi
    a_const = 216 * pi / kappa0 ** 2 + (1 + 72 * pi / kappa0 ** 2) * (4 * pi / (e * kappa0))
    b1 = 108 * pi + 4 * pi * kappa0 / e
    c1 = 288 * pi * kappa0 / e
    x_closed = (-b1 + math.sqrt(b1 ** 2 + c1)) / c1
    # quadratic: (72 pi k1 / e) x^2 + (108 pi + 2 pi k1 / e) x - 1/2, k1 = kappa0/2
    k1 = kappa0 / 2
    qa = 72 * pi * k1 / e
    qb = 108 * pi + 2 * pi * k1 / e
    x_root = (-qb + math.sqrt(qb ** 2 + 2 * qa)) / (2 * qa)
    x_linear = 1 / (6 * pi * kappa0)
    x = min(x_closed, x_root, x_linear)
    big_b = math.sqrt(2) / x
    c_inv = min(1.0, kappa0 / (12 * pi), 1 / (2 * a_const),
                (x / (64 * math.sqrt(2))) * kappa0 ** 2)
    big_c = 1 / c_inv
    ratio = float(nu) / float(nu0)
    admissible = bool(ratio > big_c)
    n_star = int(math.floor(3 * x * kappa0 ** 2 / (32 * math.sqrt(2)) * ratio)) \
        if admissible else 0
    return Constants(kappa0=kappa0, A=a_const, x_closed=x_closed, x_root=x_root,
                     x_linear=x_linear, x=x, B=big_b, C=big_c, nu_ratio=ratio,
                     n_star=n_star, admissible=admissible)


@dataclass
class RenormSchedule:
    kappa0: float
    mode: str = "adaptive"          # "rigorous" | "adaptive"
    adaptive_decay: float = 0.9
    max_steps: int = 30
    grid_size: int = DEFAULT_GRID
    constants: Constants | None = None

    def kappa(self, n: int, constants: Constants | None = None) -> float:
        """kappa_n; rigorous mode uses kappa(y)^2 = kappa1^2 - 2B(nu0/nu)(y-1)."""
        if n == 0:
            return self.kappa0
        if self.mode == "adaptive":
            return self.kappa0 * self.adaptive_decay ** n
        c = constants or self.constants
        k1 = self.kappa0 / 2
        val = k1 ** 2 - 2 * c.B * (1.0 / c.nu_ratio) * (n - 1)
        if val <= 0:
            raise ValueError(f"rigorous kappa schedule exhausted at step {n}")
        return math.sqrt(val)


@dataclass
class RenormStep:
    index: int
    kappa: float
    kappa_next: float
    norm_D: float
    norm_V: float
    norm_A: float
    hypothesis_ok: bool
    halving_ok: bool
    diag_residual: float
    extra: dict = field(default_factory=dict)


@dataclass
class EffectiveDecomposition:
    charge: ChargeOperator
    nu: float
    omega: float
    nu0: float
    frames: list            # A_n potentials, in application order
    D: ColoredPotential
    V: ColoredPotential
    steps: list
    kappa_final: float
    mode: str
    constants: Constants | None = None

    @property
    def n_steps(self) -> int:
        return len(self.frames)


def symmetrize_u1(phi: ColoredPotential, charge: ChargeOperator):
    """Split a potential termwise into its charge-diagonal (m = 0) part and
    the rest.  diag + offdiag = phi; [diag(theta), N] = 0."""
    diag = ColoredPotential(phi.graph, m=phi.m, scalars=dict(phi.scalars))
    off = ColoredPotential(phi.graph, m=phi.m)
    for (zone, nvec), matrix in sorted(phi.terms.items()):
        from .lattice import LocalOperator
        comps = ad_charge_decompose(LocalOperator(zone, matrix), charge)
        for m, comp in sorted(comps.items()):
            target = diag if m == 0 else off
            target._insert(comp.support, nvec, comp.matrix)
    return diag.pruned(), off.pruned()


def build_A(V: ColoredPotential, nu: float, charge: ChargeOperator,
            zero_mode_tol: float = 1e-10) -> ColoredPotential:
    """Antihermitian generator solving [nu N, A] = -V, termwise:
    A = -(1/nu) sum_{m != 0} V^(m) / m."""
    if V.scalars and max(abs(c) for c in V.scalars.values()) > zero_mode_tol:
        raise ValueError("V has a scalar (m = 0) component")
    out = ColoredPotential(V.graph, m=V.m)
    scale = max((np.linalg.norm(mat, 2) for mat in V.terms.values()), default=1.0)
    for (zone, nvec), matrix in sorted(V.terms.items()):
        from .lattice import LocalOperator
        comps = ad_charge_decompose(LocalOperator(zone, matrix), charge)
        if 0 in comps and np.linalg.norm(comps[0].matrix, 2) > zero_mode_tol * scale:
            raise ValueError(
                f"term on {zone} has a nonzero m = 0 component")
        for m, comp in sorted(comps.items()):
            if m == 0:
                continue
            out._insert(comp.support, nvec, -comp.matrix / (nu * m))
    return out.pruned()


# ---------------------------------------------------------------------------
# grid-exact conjugation machinery

def _eig_frames(a_grid: np.ndarray):
    """Eigendecompose antihermitian A at every grid point: A = U (i w) U^dag."""
    flat = a_grid.reshape(-1, *a_grid.shape[-2:])
    ws, us = np.linalg.eigh(-1j * flat)
    return ws, us


def _expm_from_eig(ws, us, s: float) -> np.ndarray:
    return (us * np.exp(1j * s * ws)[:, None, :]) @ np.conj(np.swapaxes(us, -1, -2))


def conjugate_grid(a_grid: np.ndarray, o_grid: np.ndarray) -> np.ndarray:
    """gamma(O) = e^{-A} O e^{A}, pointwise on the grid."""
    shape = o_grid.shape
    ws, us = _eig_frames(a_grid)
    em = _expm_from_eig(ws, us, -1.0)
    ep = np.conj(np.swapaxes(em, -1, -2))
    o = o_grid.reshape(-1, *shape[-2:])
    return (em @ o @ ep).reshape(shape)


def gamma_alpha_bundle(a_grid: np.ndarray, gamma_ops, alpha_ops):
    """Shared-eigenbasis evaluation of gamma(O) = e^{-A} O e^{A} for each O in
    ``gamma_ops`` and alpha(O) = int_0^1 e^{-sA} O e^{sA} ds for each O in
    ``alpha_ops``; one eigendecomposition of A serves all of them.

    Both maps are elementwise filters on eigenvalue differences
    l_ij = w_i - w_j: gamma multiplies by e^{-i l} and alpha by the exact
    s-integral e^{-i l/2} sinc(l / 2 pi).
    """
    ws, us = _eig_frames(a_grid)
    uh = np.conj(np.swapaxes(us, -1, -2))
    lam = ws[:, :, None] - ws[:, None, :]
    gfilt = np.exp(-1j * lam)
    afilt = np.exp(-0.5j * lam) * np.sinc(lam / (2 * np.pi))

    def apply(o, filt):
        flat = o.reshape(-1, *o.shape[-2:])
        tilt = (uh @ flat @ us) * filt
        return (us @ tilt @ uh).reshape(o.shape)

    return ([apply(o, gfilt) for o in gamma_ops],
            [apply(o, afilt) for o in alpha_ops])


def average_conjugation(a_grid: np.ndarray, o_grids, tol: float = QUAD_TOL):
    """alpha(O) = int_0^1 e^{-sA} O e^{sA} ds for each O in ``o_grids``."""
    _, results = gamma_alpha_bundle(a_grid, [], o_grids)
    return results


def _w_sampler(D, V, A, dA, omega):
    """Sampler for the step operator W on a given grid shape."""
    def sampler(grid_shape):
        d_g = assemble_grid(D, grid_shape).samples if not D.is_zero() else 0.0
        v_g = assemble_grid(V, grid_shape).samples
        a_g = assemble_grid(A, grid_shape).samples
        da_g = assemble_grid(dA, grid_shape).samples if not dA.is_zero() else np.zeros_like(v_g)
        gamma_in = ([d_g] if np.ndim(d_g) else []) + [v_g]
        gammas, alphas = gamma_alpha_bundle(a_g, gamma_in, [v_g, da_g])
        gam_v = gammas[-1]
        gam_d = gammas[0] if len(gammas) > 1 else 0.0
        alp_v, alp_da = alphas
        w = (gam_d - d_g) + (gam_v - v_g) + (v_g - alp_v) - 1j * omega * alp_da
        in_scale = max(np.abs(d_g).max() if np.ndim(d_g) else 0.0,
                       np.abs(v_g).max(),
                       abs(omega) * np.abs(da_g).max(), 1e-300)
        return GridOperatorFamily(np.asarray(w), V.m,
                                  noise_floor=1e-13 * in_scale)
    return sampler


def _stable_decompose(sampler, graph, start_shape, kappa,
                      alias_tol: float = ALIAS_TOL, max_doublings: int = 3):
    shape = tuple(start_shape)
    pot = decompose_to_potential(sampler(shape), graph)
    norm = pot.kappa_norm(kappa) if pot.terms else 0.0
    for _ in range(max_doublings):
        shape2 = tuple(2 * n for n in shape)
        pot2 = decompose_to_potential(sampler(shape2), graph)
        norm2 = pot2.kappa_norm(kappa) if pot2.terms else 0.0
        if abs(norm2 - norm) <= alias_tol * max(1.0, norm):
            return pot2, shape2
        pot, norm, shape = pot2, norm2, shape2
    raise ValueError("theta-grid aliasing check failed during frame step")


def _grid_shape_for(pots, base: int, m: int = 1):
    maxmode = max((p.max_mode() for p in pots), default=0)
    n = base
    while n < 2 * maxmode + 2:
        n *= 2
    return (n,) * m


def apply_frame_step(D, V, charge: ChargeOperator, nu: float, omega: float,
                     kappa_n: float, kappa_next: float,
                     grid_base: int = DEFAULT_GRID, rigorous: bool = False):
    """One renormalization step: returns (D_next, V_next, A, step_record)."""
    norm_v = V.kappa_norm(kappa_n) if V.terms else 0.0
    norm_d = D.kappa_norm(kappa_n) if D.terms else 0.0
    hypothesis_ok = 6 * np.pi * norm_v / nu < (kappa_n - kappa_next)
    if rigorous and not hypothesis_ok:
        raise RuntimeError(
            f"step hypothesis violated: 6 pi ||V||/nu = "
            f"{6 * np.pi * norm_v / nu:.3e} >= {kappa_n - kappa_next:.3e}")
    if not V.terms:
        a = ColoredPotential(V.graph, m=V.m)
        step = RenormStep(index=-1, kappa=kappa_n, kappa_next=kappa_next,
                          norm_D=norm_d, norm_V=0.0, norm_A=0.0,
                          hypothesis_ok=True, halving_ok=True,
                          diag_residual=0.0)
        return D, ColoredPotential(V.graph, m=V.m), a, step
    a = build_A(V, nu, charge)
    da = a.theta_derivative(0)
    sampler = _w_sampler(D, V, a, da, omega)
    shape0 = _grid_shape_for([D, V, a], grid_base, m=V.m)
    w_pot, _ = _stable_decompose(sampler, V.graph, shape0, kappa_next)
    diag_w, off_w = symmetrize_u1(w_pot, charge)
    d_next = (D + diag_w).pruned()
    v_next = off_w.pruned()
    norm_w = w_pot.kappa_norm(kappa_next) if w_pot.terms else 0.0
    # numerical noise floor: conjugation roundoff sits near eps * ||D||
    noise = 1e-13 * max(norm_d, 1.0)
    halving_ok = norm_w <= 0.5 * norm_v + noise
    step = RenormStep(index=-1, kappa=kappa_n, kappa_next=kappa_next,
                      norm_D=norm_d, norm_V=norm_v,
                      norm_A=a.kappa_norm(kappa_n) if a.terms else 0.0,
                      hypothesis_ok=bool(hypothesis_ok),
                      halving_ok=bool(halving_ok),
                      diag_residual=diag_defect(d_next, charge))
    return d_next, v_next, a, step


def diag_defect(D: ColoredPotential, charge: ChargeOperator) -> float:
    """max over terms of || m != 0 content || (should vanish for diagonal D)."""
    from .lattice import LocalOperator
    worst = 0.0
    for (zone, nvec), matrix in D.terms.items():
        comps = ad_charge_decompose(LocalOperator(zone, matrix), charge)
        for m, comp in comps.items():
            if m != 0:
                worst = max(worst, np.linalg.norm(comp.matrix, 2))
    return worst


def run_floquet_renorm(charge: ChargeOperator, H: ColoredPotential, nu: float,
                       omega: float, schedule: RenormSchedule,
                       nu0: float | None = None) -> EffectiveDecomposition:
    """Iterate frame steps per the schedule; returns the decomposition with a
    per-step audit trail."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if nu0 is None:
        nu0 = max(2 * H.kappa_norm(schedule.kappa0), omega)
    constants = compute_constants(schedule.kappa0, nu, nu0)
    schedule.constants = constants
    if schedule.mode == "rigorous" and not constants.admissible:
        raise RuntimeError(
            f"nu/nu0 = {constants.nu_ratio:.3g} below admissibility threshold "
            f"C = {constants.C:.3g}")
    d_cur, v_cur = symmetrize_u1(H, charge)
    frames, steps = [], []
    n_target = constants.n_star if schedule.mode == "rigorous" else schedule.max_steps
    kappa_n = schedule.kappa(0)
    n = 0
    while n < n_target:
        kappa_next = schedule.kappa(n + 1, constants)
        d_next, v_next, a, step = apply_frame_step(
            d_cur, v_cur, charge, nu, omega, kappa_n, kappa_next,
            grid_base=schedule.grid_size,
            rigorous=(schedule.mode == "rigorous"))
        step.index = n
        if schedule.mode == "adaptive":
            nv_next = v_next.kappa_norm(kappa_next) if v_next.terms else 0.0
            nv_cur = v_cur.kappa_norm(kappa_n) if v_cur.terms else 0.0
            if nv_cur > 0 and nv_next >= nv_cur:
                break  # V stopped shrinking; do not keep this step
        frames.append(a)
        steps.append(step)
        d_cur, v_cur = d_next, v_next
        kappa_n = kappa_next
        n += 1
        if schedule.mode == "adaptive" and not v_cur.terms:
            break
    return EffectiveDecomposition(
        charge=charge, nu=nu, omega=omega, nu0=nu0, frames=frames,
        D=d_cur, V=v_cur, steps=steps, kappa_final=kappa_n,
        mode=schedule.mode, constants=constants)


def frame_unitary(dec: EffectiveDecomposition, theta: float) -> np.ndarray:
    """Composed frame e^{A_0(theta)} e^{A_1(theta)} ... at one angle."""
    import scipy.linalg
    dim = dec.charge.graph.full_dim
    u = np.eye(dim, dtype=complex)
    for a in dec.frames:
        if a.is_zero():
            continue
        u = u @ scipy.linalg.expm(a.sample(theta))
    return u


def ledger_rows(dec: EffectiveDecomposition):
    """CSV-ready rows (n, kappa_n, norm_D, norm_V, norm_A, hypothesis_ok, halving_ok)."""
    rows = []
    for s in dec.steps:
        rows.append({
            "n": s.index, "kappa_n": s.kappa, "norm_D": s.norm_D,
            "norm_V": s.norm_V, "norm_A": s.norm_A,
            "hypothesis_ok": int(s.hypothesis_ok),
            "halving_ok": int(s.halving_ok),
        })
    return rows
