"""Experiment orchestration: config -> renormalization -> dynamics -> bundle.

A bundle is a plain dict of tables (lists of row dicts) plus the config echo;
`report.write_results` turns it into CSV files, figures, and a manifest.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ExperimentConfig, emit_config
from .dynamics import (DriveSpec, extract_lifetime, floquet_operator,
                       measure_charge_conservation, verify_lemma_bounds)
from .floquet import RenormSchedule, compute_constants, run_floquet_renorm
from .presets import build_preset
from .quasi import (lab_frame_periodicity_residual, run_quasi_renorm)

__all__ = ["run_experiment", "run_single_point", "corollary_bound",
           "fit_lifetime_trend"]


def _model_from_config(cfg: ExperimentConfig):
    return build_preset(cfg.experiment["preset"],
                        length=cfg.model["length"],
                        kappa0=cfg.model["kappa0"],
                        twist_order=cfg.model["twist_order"])


def _schedule(cfg: ExperimentConfig, kappa0: float) -> RenormSchedule:
    return RenormSchedule(kappa0=kappa0, mode=cfg.experiment["mode"],
                          max_steps=cfg.renorm["max_steps"],
                          grid_size=cfg.renorm["grid_size"])


def _sample_periods(cfg: ExperimentConfig) -> np.ndarray:
    horizon = float(cfg.dynamics["horizon_periods"])
    count = int(cfg.dynamics["sample_count"])
    return np.unique(np.round(
        np.logspace(0.0, math.log10(horizon), count)).astype(np.int64))


def corollary_bound(times, nu0: float, n0: float, spatial_dim: int,
                    range_R: int, n_star: int) -> np.ndarray:
    """2 t nu0 n0 d^R 2^{-n_star}: the conservation bound along ``times``."""
    times = np.asarray(times, dtype=float)
    return 2.0 * times * nu0 * n0 * float(spatial_dim) ** range_R * 2.0 ** (-n_star)


def run_single_point(cfg: ExperimentConfig, model, nu_ratio: float,
                     with_dynamics: bool = True) -> dict:
    """One sweep point: renormalize, optionally evolve and extract lifetimes."""
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    nu = nu_ratio * nu0
    sched = _schedule(cfg, model.kappa0)
    point = {"nu_ratio": nu_ratio, "nu": nu, "nu0": nu0}

    if model.theorem == "zn-quasi":
        n = model.twist_order
        dec = run_quasi_renorm(model.charge, model.H, nu, model.omega, n,
                               sched, nu0=nu0)
        point["decomposition"] = dec
        point["ledger"] = [{
            "n": s.index, "kappa_n": s.kappa, "norm_D": s.norm_D,
            "norm_V": s.norm_V, "norm_B": s.norm_B,
            "hypothesis_ok": int(s.hypothesis_ok),
            "halving_ok": int(s.halving_ok),
            "twist_residual": s.twist_residual,
            "theta1_variation": s.theta1_variation,
            "commutant_residual": s.commutant_residual,
        } for s in dec.steps]
        point["certificates"] = {
            "max_twist_residual": max((s.twist_residual for s in dec.steps),
                                      default=0.0),
            "max_theta1_variation": max((s.theta1_variation for s in dec.steps),
                                        default=0.0),
            "max_commutant_residual": max(
                (s.commutant_residual for s in dec.steps), default=0.0),
            "lab_frame_periodicity": lab_frame_periodicity_residual(dec),
        }
        point["summary"] = {
            "nu_ratio": nu_ratio, "n_reached": dec.n_steps,
            "norm_V_final": dec.V.kappa_norm(dec.kappa_final)
            if dec.V.terms else 0.0,
            **point["certificates"],
        }
        return point

    dec = run_floquet_renorm(model.charge, model.H, nu, model.omega, sched,
                             nu0=nu0)
    point["decomposition"] = dec
    point["ledger"] = [{
        "n": s.index, "kappa_n": s.kappa, "norm_D": s.norm_D,
        "norm_V": s.norm_V, "norm_A": s.norm_A,
        "hypothesis_ok": int(s.hypothesis_ok),
        "halving_ok": int(s.halving_ok),
        "diag_residual": s.diag_residual,
    } for s in dec.steps]
    v_final = dec.V.kappa_norm(dec.kappa_final) if dec.V.terms else 0.0
    summary = {"nu_ratio": nu_ratio, "n_reached": len(dec.steps),
               "norm_V_final": v_final,
               "tau_bare": math.inf, "tau_dressed": math.inf}

    if with_dynamics:
        spec = DriveSpec(charge=model.charge, H=model.H, nu=nu,
                         omega=model.omega, kappa0=model.kappa0)
        dt = cfg.dynamics["dt_factor"] / spec.max_scale()
        u_period = floquet_operator(spec, dt=dt)
        ks = _sample_periods(cfg)
        bare = measure_charge_conservation(spec, ks, u_period=u_period)
        dressed = measure_charge_conservation(spec, ks, dec=dec, dressed=True,
                                              u_period=u_period)
        thr = cfg.dynamics["threshold"]
        summary["tau_bare"] = extract_lifetime(bare, thr) / spec.period
        summary["tau_dressed"] = extract_lifetime(dressed, thr) / spec.period
        point["series"] = [
            {"periods": int(k), "t": float(k * spec.period),
             "bare": float(b), "dressed": float(d)}
            for k, b, d in zip(ks, bare.values, dressed.values)]
        if cfg.experiment["mode"] == "rigorous":
            bound = corollary_bound(
                bare.times, nu0, model.charge.term_bound,
                model.graph.spatial_dim, model.charge.range_R,
                dec.constants.n_star)
            for row, bval in zip(point["series"], bound):
                row["corollary_bound"] = float(bval)
    point["summary"] = summary
    return point


def fit_lifetime_trend(summary_rows) -> dict:
    """Least-squares line through (nu_ratio, log tau_dressed); returns slope,
    intercept, and R^2.  Infinite lifetimes are excluded and reported."""
    pts = [(r["nu_ratio"], r["tau_dressed"]) for r in summary_rows]
    finite = [(x, math.log(y)) for x, y in pts
              if math.isfinite(y) and y > 0]
    out = {"points_total": len(pts), "points_finite": len(finite),
           "slope": math.nan, "intercept": math.nan, "r_squared": math.nan}
    if len(finite) < 2:
        return out
    x = np.array([p[0] for p in finite])
    y = np.array([p[1] for p in finite])
    coeffs = np.polyfit(x, y, 1)
    pred = np.polyval(coeffs, x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    out["slope"] = float(coeffs[0])
    out["intercept"] = float(coeffs[1])
    out["r_squared"] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return out


def run_experiment(cfg: ExperimentConfig, with_dynamics: bool = True) -> dict:
    """Full sweep over nu_ratios; returns the result bundle."""
    model = _model_from_config(cfg)
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    bundle = {
        "config_echo": emit_config(cfg),
        "preset": model.name,
        "theorem": model.theorem,
        "nu0": nu0,
        "summary": [],
        "ledgers": {},
        "series": {},
        "points": [],
    }
    for ratio in cfg.sweep["nu_ratios"]:
        point = run_single_point(cfg, model, float(ratio),
                                 with_dynamics=with_dynamics)
        bundle["summary"].append(point["summary"])
        bundle["ledgers"][float(ratio)] = point["ledger"]
        if "series" in point:
            bundle["series"][float(ratio)] = point["series"]
        bundle["points"].append(point)
    if model.theorem == "u1-floquet" and with_dynamics:
        bundle["trend"] = fit_lifetime_trend(bundle["summary"])
    return bundle


def run_verification(cfg: ExperimentConfig) -> dict:
    """Lemma suite plus the constants cross-check, as a report dict."""
    seed = cfg.experiment["seed"]
    lemmas = verify_lemma_bounds(sample_count=100, seed=seed)
    model = _model_from_config(cfg)
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    consts = compute_constants(model.kappa0, cfg.model["nu_ratio"] * nu0, nu0)
    return {"lemmas": lemmas, "constants": consts}
