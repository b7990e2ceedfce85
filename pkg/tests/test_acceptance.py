"""End-to-end acceptance checks.

Each test exercises one headline guarantee of the package at its stated
tolerance and prints a single PASS/FAIL line with the measured numbers, so a
full run doubles as a quality report.  These are deliberately heavier than
the unit tests; run them with ``pytest tests/test_acceptance.py -v``.
"""

import filecmp
import math
import os
import time

import numpy as np
import pytest

from prethermal.charge import validate_charge
from prethermal.config import parse_config
from prethermal.dynamics import (DriveSpec, extract_lifetime,
                                 floquet_operator,
                                 measure_charge_conservation, propagate,
                                 reconstruct_propagator, verify_lemma_bounds)
from prethermal.experiment import (corollary_bound, fit_lifetime_trend,
                                   run_experiment, run_single_point)
from prethermal.floquet import (RenormSchedule, compute_constants,
                                run_floquet_renorm)
from prethermal.lattice import LocalOperator, chain_graph
from prethermal.potential import ColoredPotential
from prethermal.presets import build_preset
from prethermal.quasi import run_quasi_renorm

SZ = np.diag([0.5, -0.5])
SX = np.array([[0.0, 1.0], [1.0, 0.0]]) / 2
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]]) / 2


def _report(name, ok, detail):
    print(f"\n[{name}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"{name}: {detail}"


def _two_site_model():
    g = chain_graph(2)
    charge = validate_charge(
        [LocalOperator((i,), SZ.copy()) for i in g.sites], g)
    H = ColoredPotential(g, m=1)
    H._insert((0, 1), (0,), 0.3 * np.kron(SZ, SZ))
    H._insert((0, 1), (1,), 0.1 * (np.kron(SX, SX) + np.kron(SY, SY)))
    H._insert((0, 1), (-1,), 0.1 * (np.kron(SX, SX) + np.kron(SY, SY)))
    H._insert((0,), (1,), 0.08 * SX)
    H._insert((0,), (-1,), 0.08 * SX)
    return charge, H


@pytest.fixture(scope="module")
def rigorous_two_site():
    """Rigorous-schedule decomposition at kappa0 = 1, nu/nu0 = 1e5."""
    charge, H = _two_site_model()
    kappa0 = 1.0
    nu0 = max(2 * H.kappa_norm(kappa0), 1.3)
    nu = 1e5 * nu0
    sched = RenormSchedule(kappa0=kappa0, mode="rigorous", grid_size=16)
    t0 = time.time()
    dec = run_floquet_renorm(charge, H, nu, 1.3, sched, nu0=nu0)
    return dec, time.time() - t0


def test_01_frame_decomposition_exactness():
    model = build_preset("ising-domain-wall")  # L = 6
    assert model.graph.nsites == 6
    nu = 8.0 * model.omega
    sched = RenormSchedule(kappa0=model.kappa0, mode="adaptive", max_steps=3,
                           grid_size=16)
    t0 = time.time()
    dec = run_floquet_renorm(model.charge, model.H, nu, model.omega, sched)
    spec = DriveSpec(charge=model.charge, H=model.H, nu=nu, omega=model.omega,
                     kappa0=model.kappa0)
    times = np.linspace(0.5, 10.0, 20) * spec.period
    dt = 2e-3
    direct, _ = propagate(spec, times[-1], dt=dt, sample_times=times)
    recon = reconstruct_propagator(dec, spec, times, dt=dt)
    dev = max(np.linalg.norm(u - r, 2) for u, r in zip(direct, recon))
    elapsed = time.time() - t0
    _report("01 frame-exactness", dev < 1e-7 and elapsed < 120,
            f"max_dev={dev:.3e} (tol 1e-7)  elapsed={elapsed:.0f}s (cap 120s)")


def test_02_diagonality_every_preset_step():
    worst = (0.0, "-")
    for name in ("single-site-zeeman", "ising-domain-wall", "rydberg-chain",
                 "number-chain"):
        model = build_preset(name)
        nu = 8.0 * max(2 * model.H.kappa_norm(model.kappa0), model.omega)
        sched = RenormSchedule(kappa0=model.kappa0, mode="adaptive",
                               max_steps=2, grid_size=16)
        dec = run_floquet_renorm(model.charge, model.H, nu, model.omega, sched)
        for s in dec.steps:
            rel = s.diag_residual / max(s.norm_D, 1e-300)
            if rel > worst[0]:
                worst = (rel, f"{name} step {s.index}")
    _report("02 diagonality", worst[0] < 1e-12,
            f"max [D_n, N] residual {worst[0]:.3e} rel. ||D|| at {worst[1]} "
            f"(tol 1e-12)")


def test_03_rigorous_halving(rigorous_two_site):
    dec, elapsed = rigorous_two_site
    c = dec.constants
    ok_steps = dec.n_steps == 9 and c.n_star == 9
    bound_ok = all(s.norm_V <= dec.nu0 * 0.5 ** s.index + 1e-12 * dec.nu0
                   for s in dec.steps)
    ok = ok_steps and bound_ok and elapsed < 300
    _report("03 rigorous-halving", ok,
            f"steps={dec.n_steps} (want 9)  halving={'ok' if bound_ok else 'VIOLATED'}  "
            f"elapsed={elapsed:.0f}s (cap 300s)")


def test_04_lemma_suite():
    t0 = time.time()
    report = verify_lemma_bounds(sample_count=100, seed=42)
    elapsed = time.time() - t0
    ok = report["violations"] == 0 and elapsed < 60
    _report("04 lemma-suite", ok,
            f"violations={report['violations']}  ratios: "
            f"L1={report['lemma1_max_ratio']:.3f} "
            f"L2={report['lemma2_max_ratio']:.3f} "
            f"L3={report['lemma3_max_ratio']:.3f}  "
            f"elapsed={elapsed:.0f}s (cap 60s)")


def test_05_lifetime_scaling():
    # Threshold 2e-4 sits between the ratio-4 first-period deviation and the
    # ratio-20 dephasing plateau: low ratios cross it by heating, high ratios
    # by the renormalized residual, so every sweep point has a finite lifetime.
    cfg = parse_config({
        "experiment": {"preset": "number-chain", "mode": "adaptive"},
        "model": {"length": 8, "kappa0": 0.1},
        "renorm": {"max_steps": 2, "grid_size": 64},
        "dynamics": {"horizon_periods": 1.0e4, "sample_count": 36,
                     "threshold": 2.0e-4},
        "sweep": {"nu_ratios": [4.0, 6.0, 8.0, 12.0, 16.0, 20.0]},
    })
    t0 = time.time()
    bundle = run_experiment(cfg)
    elapsed = time.time() - t0
    trend = bundle["trend"]
    taus = {r["nu_ratio"]: r["tau_dressed"] for r in bundle["summary"]}
    ok = (trend["slope"] > 0 and trend["r_squared"] > 0.9
          and elapsed < 1800)
    _report("05 lifetime-scaling", ok,
            f"slope={trend['slope']:.3f}  R2={trend['r_squared']:.3f}  "
            f"finite={trend['points_finite']}/{trend['points_total']}  "
            f"taus={ {k: ('%.3g' % v) for k, v in taus.items()} }  "
            f"elapsed={elapsed:.0f}s (cap 1800s)")


def test_06_twist_certificates():
    model = build_preset("zn-twist-demo")
    nu = 12.0 * max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    sched = RenormSchedule(kappa0=model.kappa0, mode="adaptive", max_steps=3,
                           grid_size=16)
    t0 = time.time()
    dec = run_quasi_renorm(model.charge, model.H, nu, model.omega,
                           model.twist_order, sched)
    from prethermal.quasi import lab_frame_periodicity_residual
    twist = max((s.twist_residual for s in dec.steps), default=0.0)
    theta1 = max((s.theta1_variation for s in dec.steps), default=0.0)
    comm = max((s.commutant_residual for s in dec.steps), default=0.0)
    periodicity = lab_frame_periodicity_residual(dec)
    elapsed = time.time() - t0
    ok = (twist < 1e-10 and theta1 < 1e-10 and comm < 1e-12
          and periodicity < 1e-10 and elapsed < 300)
    _report("06 twist-certificates", ok,
            f"twist={twist:.2e} (1e-10)  theta1_var={theta1:.2e} (1e-10)  "
            f"[D,g]={comm:.2e} (1e-12)  e^A-period={periodicity:.2e} (1e-10)  "
            f"elapsed={elapsed:.0f}s (cap 300s)")


def test_07_constants_cross_check():
    c = compute_constants(1.0, 1e5, 1.0)
    # closed form satisfies its own quadratic to 1e-12; root-finder value
    # satisfies P to 1e-12; min is what the engine uses
    b1 = 108 * math.pi + 4 * math.pi / math.e
    c1 = 288 * math.pi / math.e
    r_closed = abs((c1 / 2) * c.x_closed ** 2 + b1 * c.x_closed - 0.5)
    qa = 72 * math.pi * 0.5 / math.e
    qb = 108 * math.pi + 2 * math.pi * 0.5 / math.e
    r_root = abs(qa * c.x_root ** 2 + qb * c.x_root - 0.5)
    same_scale = abs(c.x_closed - c.x_root) < 0.1 * c.x_closed
    ok = (r_closed < 1e-12 and r_root < 1e-12 and same_scale
          and c.x == min(c.x_closed, c.x_root, c.x_linear))
    _report("07 constants-cross-check", ok,
            f"x_closed={c.x_closed:.6e}  x_root={c.x_root:.6e}  "
            f"x_linear={c.x_linear:.6e}  x=min={c.x:.6e}  "
            f"residuals {r_closed:.1e}/{r_root:.1e} (tol 1e-12)")


def test_08_conservation_bound_dominates(rigorous_two_site):
    dec, _ = rigorous_two_site
    charge, H = _two_site_model()
    spec = DriveSpec(charge=charge, H=H, nu=dec.nu, omega=dec.omega,
                     kappa0=1.0)
    dt = 1e-5
    u_period = floquet_operator(spec, dt=dt)
    # integrator convergence guard: doubling dt must not move U(T) materially
    u_check = floquet_operator(spec, dt=2 * dt)
    integ_err = np.linalg.norm(u_period - u_check, 2)
    ks = np.unique(np.round(np.logspace(0, 8, 30)).astype(np.int64))
    series = measure_charge_conservation(spec, ks, u_period=u_period)
    bound = corollary_bound(series.times, dec.nu0, charge.term_bound,
                            charge.graph.spatial_dim, charge.range_R,
                            dec.constants.n_star)
    margin = np.min(bound - series.values)
    ok = np.all(series.values < bound) and integ_err < 1e-3
    _report("08 conservation-bound", ok,
            f"min margin={margin:.3e}  max dev={series.values.max():.3e}  "
            f"integrator check={integ_err:.1e}")


def test_09_preprocessor_equivalence():
    from prethermal.preprocess import AmplitudeProfile, certify_equivalence
    charge, H = _two_site_model()
    spec = DriveSpec(charge=charge, H=H, nu=12.0, omega=1.3, kappa0=1.0)
    profile = AmplitudeProfile.cosine(0.5, spec.omega)
    period = spec.period
    times = [0.4 * period, 1.1 * period, 2.3 * period]
    report = certify_equivalence(spec, profile, times, dt=1e-3)
    dev = report["max_deviation"]
    _report("09 preprocessor-equivalence", dev < 1e-7,
            f"max_dev={dev:.3e} over 3 matched times, both strategies "
            f"(tol 1e-7)")


def test_10_sweep_determinism(tmp_path):
    from prethermal import cli
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(
        '[experiment]\npreset = "single-site-zeeman"\n'
        '[renorm]\nmax_steps = 2\ngrid_size = 16\n'
        '[dynamics]\nhorizon_periods = 1e6\nsample_count = 25\n'
        '[sweep]\nnu_ratios = [6.0, 8.0]\n')
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["sweep", "--config", str(cfg_path), "--out", out_a]) == 0
    assert cli.main(["sweep", "--config", str(cfg_path), "--out", out_b]) == 0
    csvs = sorted(f for f in os.listdir(out_a) if f.endswith(".csv"))
    diffs = [f for f in csvs
             if not filecmp.cmp(os.path.join(out_a, f),
                                os.path.join(out_b, f), shallow=False)]
    _report("10 sweep-determinism", len(csvs) >= 3 and not diffs,
            f"{len(csvs)} csv files byte-identical across repeated runs"
            + (f"; DIFFER: {diffs}" if diffs else ""))
