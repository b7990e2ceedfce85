"""Command-line harness.

Subcommands: constants, renorm, evolve, sweep, verify, preprocess.
All take --config/--seed/--out/--mode overrides; results land under the
output directory as CSVs, figures, and a manifest.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

import numpy as np

from .config import DEFAULTS, ExperimentConfig, load_config, parse_config
from .experiment import (_model_from_config, fit_lifetime_trend,
                         run_experiment, run_single_point, run_verification)
from .floquet import compute_constants
from .report import write_results


def _base_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="prethermal",
        description="frame-renormalization laboratory for driven lattices")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("constants", "admissibility constants report"),
            ("renorm", "renormalization only; emits the ledger"),
            ("evolve", "dynamics at a single sweep point"),
            ("sweep", "full experiment over nu_ratios"),
            ("verify", "lemma suite and invariant checks"),
            ("preprocess", "time-dependent-amplitude reductions")]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", default=None, help="TOML config path")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--mode", choices=["rigorous", "adaptive"],
                        default=None)
    return p


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    if args.seed is not None:
        cfg.experiment["seed"] = args.seed
    if args.out is not None:
        cfg.experiment["out"] = args.out
    if args.mode is not None:
        cfg.experiment["mode"] = args.mode
    return cfg


def _cmd_constants(cfg: ExperimentConfig) -> int:
    model = _model_from_config(cfg)
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    c = compute_constants(model.kappa0, cfg.model["nu_ratio"] * nu0, nu0)
    print(json.dumps(dataclasses.asdict(c), indent=2, sort_keys=True))
    return 0


def _cmd_renorm(cfg: ExperimentConfig) -> int:
    model = _model_from_config(cfg)
    point = run_single_point(cfg, model, cfg.model["nu_ratio"],
                             with_dynamics=False)
    bundle = {"config_echo": _echo(cfg), "preset": model.name,
              "theorem": model.theorem, "nu0": point["nu0"],
              "summary": [point["summary"]],
              "ledgers": {cfg.model["nu_ratio"]: point["ledger"]},
              "series": {}}
    write_results(bundle, cfg.experiment["out"])
    for row in point["ledger"]:
        print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in row.items()))
    return 0


def _cmd_evolve(cfg: ExperimentConfig) -> int:
    model = _model_from_config(cfg)
    point = run_single_point(cfg, model, cfg.model["nu_ratio"])
    bundle = {"config_echo": _echo(cfg), "preset": model.name,
              "theorem": model.theorem, "nu0": point["nu0"],
              "summary": [point["summary"]],
              "ledgers": {cfg.model["nu_ratio"]: point["ledger"]},
              "series": {cfg.model["nu_ratio"]: point.get("series", [])}}
    write_results(bundle, cfg.experiment["out"])
    print(json.dumps(point["summary"], indent=2, sort_keys=True,
                     default=_json_default))
    return 0


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    bundle = run_experiment(cfg)
    manifest = write_results(bundle, cfg.experiment["out"])
    for row in bundle["summary"]:
        print(json.dumps(row, sort_keys=True, default=_json_default))
    if "trend" in bundle:
        print(json.dumps({"trend": bundle["trend"]}, sort_keys=True,
                         default=_json_default))
    print(f"wrote {len(manifest['files'])} csv files to "
          f"{cfg.experiment['out']}")
    return 0


def _cmd_verify(cfg: ExperimentConfig) -> int:
    report = run_verification(cfg)
    lemmas = report["lemmas"]
    consts = report["constants"]
    print(json.dumps({
        "lemmas": {k: v for k, v in lemmas.items() if k != "counterexamples"},
        "constants": dataclasses.asdict(consts),
    }, indent=2, sort_keys=True, default=_json_default))
    return 0 if lemmas["violations"] == 0 else 1


def _cmd_preprocess(cfg: ExperimentConfig) -> int:
    from .dynamics import DriveSpec
    from .preprocess import AmplitudeProfile, certify_equivalence
    model = _model_from_config(cfg)
    nu0 = max(2 * model.H.kappa_norm(model.kappa0), model.omega)
    spec = DriveSpec(charge=model.charge, H=model.H,
                     nu=cfg.model["nu_ratio"] * nu0, omega=model.omega,
                     kappa0=model.kappa0)
    profile = AmplitudeProfile.cosine(0.5, model.omega)
    period = 2 * math.pi / model.omega
    times = [0.4 * period, 1.1 * period, 2.3 * period]
    report = certify_equivalence(spec, profile, times)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["max_deviation"] < 1e-6 else 1


def _echo(cfg: ExperimentConfig) -> str:
    from .config import emit_config
    return emit_config(cfg)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"not serializable: {type(obj).__name__}")


_COMMANDS = {
    "constants": _cmd_constants,
    "renorm": _cmd_renorm,
    "evolve": _cmd_evolve,
    "sweep": _cmd_sweep,
    "verify": _cmd_verify,
    "preprocess": _cmd_preprocess,
}


def main(argv=None) -> int:
    args = _base_parser().parse_args(argv)
    cfg = _load(args)
    np.random.seed(cfg.experiment["seed"] % (2 ** 32))
    return _COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
