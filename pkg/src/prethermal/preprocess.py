"""Reduction of time-dependent drive amplitudes nu(t) = nu_bar (1 + f(t)).

Two equivalent routes to a constant-amplitude problem:

(i)  reparameterize time, t' = t + int_0^t f(s) ds; the new generator is the
     old one divided by (1 + f), so the charge term becomes exactly
     nu_bar N while the drive is traversed at a modulated rate;
(ii) pass to the rotating frame U0(t) = exp(-i nu_bar F(t) N), F = int f,
     which removes the modulation from the charge term and imprints it as
     charge-mode-dependent phases on the drive.

Both produce the same physical propagator; `certify_equivalence` checks them
against direct integration of the modulated generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .charge import ad_charge_decompose, charge_matrix
from .dynamics import DriveSpec, propagate_generator, default_dt
from .lattice import LocalOperator, embed_operator

__all__ = ["AmplitudeProfile", "TransformedDrive", "preprocess_drive",
           "certify_equivalence"]


@dataclass
class AmplitudeProfile:
    """f(t) periodic with zero average and |f| < 1; F(t) = int_0^t f."""

    f: object
    F: object
    period: float

    @classmethod
    def cosine(cls, depth: float, omega: float) -> "AmplitudeProfile":
        if not 0 <= abs(depth) < 1:
            raise ValueError("|depth| must be < 1")
        return cls(f=lambda t: depth * math.cos(omega * t),
                   F=lambda t: depth * math.sin(omega * t) / omega,
                   period=2 * math.pi / omega)

    def validate(self, samples: int = 257):
        ts = np.linspace(0.0, self.period, samples)
        vals = np.array([self.f(t) for t in ts])
        if np.max(np.abs(vals)) >= 1.0:
            raise ValueError("|f| >= 1 somewhere; reparameterization "
                             "would not be monotone")
        mean = trapezoid(vals, ts) / self.period
        if abs(mean) > 1e-8:
            raise ValueError(f"f has nonzero average {mean:.3e}")


@dataclass
class TransformedDrive:
    """A constant-amplitude generator equivalent to a modulated spec.

    ``generator(t)`` drives the transformed propagator; ``recover(u, t)``
    maps it back to the original-frame propagator at original time t.
    """

    strategy: str
    generator: object
    recover: object
    time_map: object        # t -> transformed time (identity for frame route)


def _modulated_spec(spec: DriveSpec, profile: AmplitudeProfile) -> DriveSpec:
    return DriveSpec(charge=spec.charge, H=spec.H, nu=spec.nu,
                     omega=spec.omega, n=spec.n, theta0=spec.theta0,
                     kappa0=spec.kappa0, amplitude=profile.f)


def preprocess_drive(spec: DriveSpec, profile: AmplitudeProfile,
                     strategy: str = "reparameterize") -> TransformedDrive:
    """Build the constant-amplitude equivalent of nu(t) = nu (1 + f(t))."""
    profile.validate()
    if spec.amplitude is not None:
        raise ValueError("spec already carries an amplitude profile")
    nmat = charge_matrix(spec.charge) * (spec.nu / spec.n)

    if strategy == "reparameterize":
        def tprime(t):
            return t + profile.F(t)

        def t_of_tprime(tp):
            # strictly monotone since |f| < 1
            lo, hi = tp - 1.0, tp + 1.0
            while tprime(lo) > tp:
                lo -= 1.0
            while tprime(hi) < tp:
                hi += 1.0
            return brentq(lambda t: tprime(t) - tp, lo, hi, xtol=1e-13)

        def generator(tp):
            t = t_of_tprime(tp)
            scale = 1.0 + profile.f(t)
            return nmat + spec.drive_matrix(t) / scale

        def recover(u, t):
            return u

        return TransformedDrive(strategy="reparameterize",
                                generator=generator, recover=recover,
                                time_map=tprime)

    if strategy == "rotating-frame":
        nbare = charge_matrix(spec.charge)
        w, v = np.linalg.eigh(nbare)

        def u0(t):
            phase = spec.nu * profile.F(t) / spec.n
            return (v * np.exp(-1j * phase * w)) @ v.conj().T

        def generator(t):
            u = u0(t)
            return nmat + u.conj().T @ spec.drive_matrix(t) @ u

        def recover(umat, t):
            return u0(t) @ umat @ u0(0.0).conj().T

        return TransformedDrive(strategy="rotating-frame",
                                generator=generator, recover=recover,
                                time_map=lambda t: t)

    raise ValueError(f"unknown strategy '{strategy}'")


def certify_equivalence(spec: DriveSpec, profile: AmplitudeProfile,
                        times, dt: float = None) -> dict:
    """Propagate the modulated generator directly and via both strategies;
    returns per-time deviations for each route."""
    if dt is None:
        dt = default_dt(spec)
    times = sorted(times)
    modulated = _modulated_spec(spec, profile)
    dim = spec.graph.full_dim
    direct, _ = propagate_generator(modulated.generator, times[-1], dt,
                                    sample_times=times, dim=dim)
    report = {"times": list(times)}
    for strategy in ("reparameterize", "rotating-frame"):
        trans = preprocess_drive(spec, profile, strategy)
        devs = []
        for t, u_ref in zip(times, direct):
            horizon = trans.time_map(t)
            samples, _ = propagate_generator(trans.generator, horizon, dt,
                                             sample_times=[horizon], dim=dim)
            u = trans.recover(samples[0], t)
            devs.append(float(np.linalg.norm(u - u_ref, 2)))
        report[strategy] = devs
    report["max_deviation"] = max(max(report["reparameterize"]),
                                  max(report["rotating-frame"]))
    return report
