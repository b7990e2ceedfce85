"""The charge operator, its spectral structure and mode decompositions.

A charge is a sum of mutually commuting local terms with (shifted) integer
spectrum.  Everything downstream of it -- mode decompositions, the group
generator, dressed charges -- lives here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import (LocalOperator, SiteGraph, commutator, embed_operator,
                      op_norm, restrict_to_region)

__all__ = [
    "ChargeOperator",
    "ChargeValidationError",
    "validate_charge",
    "ad_charge_decompose",
    "group_generator",
    "dress_charge",
    "charge_matrix",
]

_COMMUTE_TOL = 1e-12
_INTEGER_TOL = 1e-10


class ChargeValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ChargeOperator:
    """Validated charge: commuting local terms with integer-structured spectrum."""

    graph: SiteGraph
    terms: tuple            # LocalOperators
    range_R: int
    term_bound: float       # sup_S ||N_S||
    offsets: tuple          # per-term shift making the spectrum integer
    integer_spectrum: bool  # integer eigenvalues (after uniform shift)
    integer_spacings: bool  # integer eigenvalue differences

    def matrix(self) -> np.ndarray:
        return charge_matrix(self)

    def overlapping_terms(self, support):
        s = set(support)
        return [t for t in self.terms if set(t.support) & s]


def _best_shift(eigs: np.ndarray):
    """Uniform shift minimizing the max distance of eigenvalues to integers."""
    # candidate shifts: fractional parts of the eigenvalues
    best = (np.inf, 0.0)
    for cand in np.concatenate([eigs - np.round(eigs), [0.0]]):
        shifted = eigs - cand
        dev = np.max(np.abs(shifted - np.round(shifted)))
        if dev < best[0]:
            best = (dev, float(cand))
    return best[1], best[0]


def validate_charge(terms, graph: SiteGraph,
                    commute_tol: float = _COMMUTE_TOL,
                    integer_tol: float = _INTEGER_TOL) -> ChargeOperator:
    """Check commutation, integer spectrum / spacings, and range of a term list."""
    terms = tuple(terms)
    for t in terms:
        t.check_dim(graph)
    for i, a in enumerate(terms):
        for b in terms[i + 1:]:
            if not (set(a.support) & set(b.support)):
                continue
            r = op_norm(commutator(a, b, graph))
            scale = max(op_norm(a) * op_norm(b), 1.0)
            if r > commute_tol * scale:
                raise ChargeValidationError(
                    f"terms on {a.support} and {b.support} do not commute "
                    f"(residual {r:.3e})")
    offsets = []
    integer_spec = True
    integer_spac = True
    n0 = 0.0
    range_R = 0
    for t in terms:
        herm_defect = op_norm(LocalOperator(t.support, t.matrix - t.matrix.conj().T))
        if herm_defect > commute_tol * max(op_norm(t), 1.0):
            raise ChargeValidationError(f"term on {t.support} is not Hermitian")
        eigs = np.linalg.eigvalsh(t.matrix)
        shift, dev = _best_shift(eigs)
        offsets.append(shift)
        if dev > integer_tol:
            integer_spec = False
        diffs = eigs[:, None] - eigs[None, :]
        if np.max(np.abs(diffs - np.round(diffs))) > integer_tol:
            integer_spac = False
        n0 = max(n0, op_norm(t))
        if op_norm(t) > 0:
            range_R = max(range_R, graph.diameter(t.support) + 1 if len(t.support) > 1 else 1)
    if not integer_spac:
        raise ChargeValidationError(
            "charge spectrum has non-integer eigenvalue spacings")
    return ChargeOperator(graph=graph, terms=terms, range_R=range_R,
                          term_bound=float(n0), offsets=tuple(offsets),
                          integer_spectrum=integer_spec,
                          integer_spacings=integer_spac)


def charge_matrix(charge: ChargeOperator) -> np.ndarray:
    n = np.zeros((charge.graph.full_dim,) * 2, dtype=complex)
    for t in charge.terms:
        n += embed_operator(t, charge.graph)
    return n


def _local_charge(charge: ChargeOperator, support):
    """Region covering ``support`` plus all overlapping charge terms, with the
    restricted charge matrix on it."""
    graph = charge.graph
    overlapping = charge.overlapping_terms(support)
    region = set(support)
    for t in overlapping:
        region |= set(t.support)
    region = graph.sorted_sites(region)
    dim = graph.local_dim ** len(region)
    nloc = np.zeros((dim, dim), dtype=complex)
    for t in overlapping:
        nloc += restrict_to_region(t, region, graph)
    return region, nloc


def ad_charge_decompose(op: LocalOperator, charge: ChargeOperator,
                        tol: float = 1e-10) -> dict:
    """Split ``op`` into components V^(m) with [N, V^(m)] = m V^(m).

    Computed per connected overlap region: only charge terms overlapping the
    operator's support matter, so the result lives on the (possibly enlarged)
    union region, never the full space.
    """
    region, nloc = _local_charge(charge, op.support)
    mat = restrict_to_region(op, region, charge.graph)
    eigs, vecs = np.linalg.eigh(nloc)
    rot = vecs.conj().T @ mat @ vecs
    diffs = eigs[:, None] - eigs[None, :]
    ms = np.round(diffs)
    if np.max(np.abs(diffs - ms)) > tol:
        raise ChargeValidationError(
            "charge eigenvalue differences are not integers")
    components = {}
    scale = max(np.abs(rot).max(), 1.0)
    for m in np.unique(ms.astype(int)):
        mask = ms.astype(int) == m
        piece = np.where(mask, rot, 0.0)
        if np.abs(piece).max() <= 1e-15 * scale:
            continue
        components[int(m)] = LocalOperator(
            region, vecs @ piece @ vecs.conj().T)
    return components


def mode_project(op: LocalOperator, charge: ChargeOperator, m: int = 0) -> LocalOperator:
    """The m-th ad_N component of ``op`` (m = 0: the symmetrized part)."""
    comps = ad_charge_decompose(op, charge)
    if m in comps:
        return comps[m]
    region, _ = _local_charge(charge, op.support)
    d = charge.graph.local_dim
    return LocalOperator(region, np.zeros((d ** len(region),) * 2))


def group_generator(charge: ChargeOperator, n: int, tol: float = 1e-10) -> np.ndarray:
    """g = exp(i 2 pi N / n); raises if g^n deviates from the identity."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    nmat = charge_matrix(charge)
    eigs, vecs = np.linalg.eigh(nmat)
    g = (vecs * np.exp(2j * np.pi * eigs / n)) @ vecs.conj().T
    gn = np.linalg.matrix_power(g, n)
    # allow a global phase: g^n = e^{i phi} I when the spectrum is shifted
    phase = gn[0, 0] / abs(gn[0, 0])
    if np.linalg.norm(gn - phase * np.eye(len(gn)), 2) > tol:
        raise ChargeValidationError(
            "g^n is not proportional to the identity: eigenvalue spacings "
            "are not integers")
    return g / phase ** (1.0 / n)


def dress_charge(charge: ChargeOperator, frame: np.ndarray,
                 tol: float = 1e-12) -> np.ndarray:
    """Dressed charge e^A N e^{-A} for an antihermitian full-space A."""
    defect = np.linalg.norm(frame + frame.conj().T, 2)
    if defect > tol * max(np.linalg.norm(frame, 2), 1.0):
        raise ValueError(f"frame generator is not antihermitian ({defect:.2e})")
    u = scipy.linalg.expm(frame)
    return u @ charge_matrix(charge) @ u.conj().T
