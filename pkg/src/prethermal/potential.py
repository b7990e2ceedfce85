"""Colored potentials: operator families indexed by (zone, Fourier vector).

A potential maps colored sets (Z, n) to local operators; it doubles as a
periodic operator family H(theta) = sum_{Z,n} Phi_{Z,n} e^{i n.theta}.  The
dual representation is a uniform theta-grid of full-space matrices; the two
are connected by a string decomposition (per-site orthonormal Hermitian
basis) and an FFT over the grid.

Identity (scalar) components are tracked separately: they carry no locality
weight but matter for propagator phases.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .lattice import LocalOperator, SiteGraph, embed_operator, op_norm

__all__ = [
    "ColoredPotential",
    "GridOperatorFamily",
    "site_basis",
    "assemble_grid",
    "decompose_to_potential",
    "kappa_norm",
]

PRUNE_REL = 1e-14
GRID_TOL = 1e-10
ALIAS_TOL = 1e-9


@lru_cache(maxsize=8)
def site_basis(d: int) -> np.ndarray:
    """Orthonormal Hermitian basis of d x d matrices, identity first.

    Element 0 is I/sqrt(d); the rest are traceless (generalized Gell-Mann).
    For d = 2 this is {I, sx, sy, sz}/sqrt(2).
    """
    mats = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            x = np.zeros((d, d), dtype=complex)
            x[j, k] = x[k, j] = 1 / np.sqrt(2)
            mats.append(x)
            y = np.zeros((d, d), dtype=complex)
            y[j, k] = -1j / np.sqrt(2)
            y[k, j] = 1j / np.sqrt(2)
            mats.append(y)
    for l in range(1, d):
        diag = np.zeros(d, dtype=complex)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))))
    return np.array(mats)


@lru_cache(maxsize=8)
def _basis_flat(d: int):
    b = site_basis(d)
    flat = b.reshape(d * d, d * d)          # row a = B_a flattened
    return flat, flat.conj()


def _pairs_tensor(mat: np.ndarray, nsites: int, d: int) -> np.ndarray:
    """Reshape a d^L x d^L matrix to a tensor with one (i,j) pair per site."""
    t = mat.reshape((d,) * (2 * nsites))
    perm = [x for k in range(nsites) for x in (k, nsites + k)]
    return t.transpose(perm).reshape((d * d,) * nsites)


def _unpairs_tensor(t: np.ndarray, nsites: int, d: int) -> np.ndarray:
    t = t.reshape((d, d) * nsites)
    perm = [2 * k for k in range(nsites)] + [2 * k + 1 for k in range(nsites)]
    return t.transpose(perm).reshape(d ** nsites, d ** nsites)


def string_coefficients(mat: np.ndarray, nsites: int, d: int) -> np.ndarray:
    """Coefficient tensor C[a1..aL] of ``mat`` over the product site basis."""
    _, flat_c = _basis_flat(d)
    t = _pairs_tensor(mat, nsites, d)
    for ax in range(nsites):
        t = np.moveaxis(np.tensordot(t, flat_c, axes=([ax], [1])), -1, ax)
    return t


def coefficients_to_matrix(coeffs: np.ndarray, nsites: int, d: int,
                           identity_slots: int = 0) -> np.ndarray:
    """Inverse of :func:`string_coefficients` on ``nsites`` sites.

    ``coeffs`` axes of size d^2 use the full basis; axes of size d^2 - 1 use
    only the traceless part (indices shifted by one).
    """
    flat, _ = _basis_flat(d)
    t = coeffs
    for ax in range(nsites):
        rows = flat if t.shape[ax] == d * d else flat[1:]
        t = np.moveaxis(np.tensordot(t, rows, axes=([ax], [0])), -1, ax)
    return _unpairs_tensor(t, nsites, d)


class ColoredPotential:
    """Immutable-by-convention map from colored sets to local operators."""

    def __init__(self, graph: SiteGraph, m: int = 1, terms=None, scalars=None):
        self.graph = graph
        self.m = m
        self.terms = {}     # (zone tuple, nvec tuple) -> matrix
        self.scalars = {}   # nvec tuple -> complex
        if terms:
            for (zone, nvec), matrix in terms.items():
                self._insert(zone, nvec, matrix)
        if scalars:
            for nvec, c in scalars.items():
                self.scalars[tuple(nvec)] = self.scalars.get(tuple(nvec), 0.0) + c

    # -- construction -----------------------------------------------------
    def _insert(self, zone, nvec, matrix):
        nvec = tuple(int(x) for x in nvec)
        if len(nvec) != self.m:
            raise ValueError(f"Fourier vector {nvec} has wrong length")
        zone = self.graph.sorted_sites(zone)
        if not self.graph.is_connected_set(zone):
            # assign to the smallest connected superset; zones stay connected
            superset = self.graph.connected_superset(zone)
            from .lattice import restrict_to_region
            matrix = restrict_to_region(
                LocalOperator(zone, matrix), superset, self.graph)
            zone = superset
        key = (zone, nvec)
        if key in self.terms:
            self.terms[key] = self.terms[key] + matrix
        else:
            self.terms[key] = np.asarray(matrix, dtype=complex)

    @classmethod
    def from_terms(cls, graph, entries, m: int = 1, scalars=None):
        """entries: iterable of (zone, nvec, matrix)."""
        pot = cls(graph, m=m, scalars=scalars)
        for zone, nvec, matrix in entries:
            pot._insert(zone, nvec, matrix)
        return pot

    # -- algebra ----------------------------------------------------------
    def _like(self, terms, scalars):
        out = ColoredPotential(self.graph, m=self.m)
        out.terms = terms
        out.scalars = scalars
        return out

    def __add__(self, other):
        if other.graph is not self.graph or other.m != self.m:
            raise ValueError("potentials live on different spaces")
        terms = {k: v.copy() for k, v in self.terms.items()}
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v.copy()
        scalars = dict(self.scalars)
        for k, v in other.scalars.items():
            scalars[k] = scalars.get(k, 0.0) + v
        return self._like(terms, scalars)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return self._like({k: c * v for k, v in self.terms.items()},
                          {k: c * v for k, v in self.scalars.items()})

    def pruned(self, rel: float = PRUNE_REL):
        scale = max((op_norm(v) for v in self.terms.values()), default=0.0)
        scale = max(scale, max((abs(v) for v in self.scalars.values()), default=0.0))
        if scale == 0.0:
            return self._like({}, {})
        terms = {k: v for k, v in self.terms.items() if op_norm(v) > rel * scale}
        scalars = {k: v for k, v in self.scalars.items() if abs(v) > rel * scale}
        return self._like(terms, scalars)

    def is_zero(self) -> bool:
        return not self.terms and not self.scalars

    # -- analysis ---------------------------------------------------------
    def kappa_norm(self, kappa: float) -> float:
        """sup over sites of sum_{(Z,n) containing the site} e^{k(|Z|+|n|_1)} ||op||.

        Scalar components carry no site, hence do not contribute.
        """
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        per_site = {}
        for (zone, nvec), matrix in self.terms.items():
            w = np.exp(kappa * (len(zone) + sum(abs(n) for n in nvec))) * op_norm(matrix)
            for s in zone:
                per_site[s] = per_site.get(s, 0.0) + w
        return max(per_site.values(), default=0.0)

    def theta_derivative(self, component: int = 0):
        """Termwise i * n_component; scalars differentiate the same way."""
        if not 0 <= component < self.m:
            raise ValueError(f"invalid angle component {component}")
        terms = {}
        for (zone, nvec), matrix in self.terms.items():
            if nvec[component] != 0:
                terms[(zone, nvec)] = 1j * nvec[component] * matrix
        scalars = {n: 1j * n[component] * c
                   for n, c in self.scalars.items() if n[component] != 0}
        return self._like(terms, scalars)

    def max_mode(self) -> int:
        """Largest |n_j| over all components and terms."""
        best = 0
        for (_, nvec) in self.terms:
            best = max(best, max((abs(n) for n in nvec), default=0))
        for nvec in self.scalars:
            best = max(best, max((abs(n) for n in nvec), default=0))
        return best

    def sample(self, theta) -> np.ndarray:
        """Full-space matrix at a single angle vector."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        dim = self.graph.full_dim
        out = np.zeros((dim, dim), dtype=complex)
        for (zone, nvec), matrix in sorted(self.terms.items()):
            phase = np.exp(1j * np.dot(nvec, theta))
            out += phase * embed_operator(LocalOperator(zone, matrix), self.graph)
        for nvec, c in sorted(self.scalars.items()):
            out += c * np.exp(1j * np.dot(nvec, theta)) * np.eye(dim)
        return out

    def adjoint_family(self):
        """Potential of the pointwise adjoint H(theta)^dagger."""
        terms = {}
        for (zone, nvec), matrix in self.terms.items():
            key = (zone, tuple(-n for n in nvec))
            mat = matrix.conj().T
            terms[key] = terms[key] + mat if key in terms else mat
        scalars = {tuple(-n for n in nvec): np.conj(c)
                   for nvec, c in self.scalars.items()}
        return self._like(terms, scalars)

    def hermiticity_defect(self) -> float:
        return max((op_norm(v) for v in (self - self.adjoint_family()).terms.values()),
                   default=0.0)


class GridOperatorFamily:
    """Full-space matrices sampled on a uniform theta grid (one axis per angle)."""

    def __init__(self, samples: np.ndarray, m: int, noise_floor: float = 0.0):
        self.samples = samples
        self.m = m
        # absolute floor below which Fourier modes are roundoff, set by the
        # largest intermediates that produced the samples
        self.noise_floor = noise_floor

    @property
    def grid_shape(self):
        return self.samples.shape[:self.m]

    def thetas(self, axis: int) -> np.ndarray:
        n = self.grid_shape[axis]
        return 2 * np.pi * np.arange(n) / n

    def __sub__(self, other):
        return GridOperatorFamily(self.samples - other.samples, self.m)

    def max_norm(self) -> float:
        flat = self.samples.reshape(-1, *self.samples.shape[-2:])
        return max(np.linalg.norm(s, 2) for s in flat)


def assemble_grid(phi: ColoredPotential, grid_shape) -> GridOperatorFamily:
    """Evaluate the potential on a uniform grid via an inverse FFT over modes."""
    if isinstance(grid_shape, int):
        grid_shape = (grid_shape,) * phi.m
    if len(grid_shape) != phi.m:
        raise ValueError("grid shape rank mismatch")
    need = 2 * phi.max_mode() + 2
    if any(n < need for n in grid_shape):
        raise ValueError(
            f"grid {grid_shape} too small for Fourier content (need >= {need})")
    dim = phi.graph.full_dim
    modes = np.zeros(tuple(grid_shape) + (dim, dim), dtype=complex)
    for (zone, nvec), matrix in sorted(phi.terms.items()):
        idx = tuple(n % g for n, g in zip(nvec, grid_shape))
        modes[idx] += embed_operator(LocalOperator(zone, matrix), phi.graph)
    eye = np.eye(dim)
    for nvec, c in sorted(phi.scalars.items()):
        idx = tuple(n % g for n, g in zip(nvec, grid_shape))
        modes[idx] += c * eye
    samples = np.fft.ifftn(modes, axes=tuple(range(phi.m)))
    samples *= np.prod(grid_shape)
    return GridOperatorFamily(samples, phi.m)


MODE_PRUNE = 1e-12


def decompose_to_potential(family: GridOperatorFamily, graph: SiteGraph,
                           prune_rel: float = PRUNE_REL,
                           mode_prune: float = MODE_PRUNE,
                           verify: bool = False,
                           grid_tol: float = GRID_TOL) -> ColoredPotential:
    """Grid samples -> colored potential.

    Per Fourier mode (FFT over the grid), the matrix is expanded in product
    strings of the per-site basis, strings are grouped by minimal support,
    and disconnected supports are reassigned to their smallest connected
    superset.
    """
    m = family.m
    d = graph.local_dim
    nsites = graph.nsites
    modes = np.fft.fftn(family.samples, axes=tuple(range(m)))
    modes /= np.prod(family.grid_shape)
    grid_shape = family.grid_shape
    freq_axes = [np.fft.fftfreq(n, 1.0 / n).astype(int) for n in grid_shape]
    scale = max(np.abs(modes).max(), 1e-300)
    floor = max(mode_prune * scale, family.noise_floor)
    pot = ColoredPotential(graph, m=m)
    it = np.ndindex(*grid_shape)
    for idx in it:
        mat = modes[idx]
        # modes below the floor are FFT roundoff of the exactly representable
        # content; keeping them would poison the kappa-norm through the
        # e^{kappa |n|} weight
        if np.abs(mat).max() <= floor:
            continue
        nvec = tuple(int(freq_axes[ax][idx[ax]]) for ax in range(m))
        coeffs = string_coefficients(mat, nsites, d)
        _scatter_strings(pot, coeffs, nvec, graph, prune_rel * scale)
    pot = pot.pruned(prune_rel)
    if verify:
        re = assemble_grid(pot, grid_shape)
        resid = (re - family).max_norm()
        ref = max(family.max_norm(), 1.0)
        if resid > grid_tol * ref:
            raise ValueError(
                f"round-trip residual {resid:.3e} exceeds tolerance; "
                "grid does not resolve the family (aliasing)")
    return pot


def _scatter_strings(pot: ColoredPotential, coeffs: np.ndarray, nvec,
                     graph: SiteGraph, abs_tol: float):
    """Group the string coefficients of one Fourier mode by minimal support."""
    d = graph.local_dim
    nsites = graph.nsites
    id_factor = d ** (-0.5)
    nontrivial = [i for i in range(nsites)]
    # iterate over support patterns
    for mask in range(2 ** nsites):
        sel = tuple(slice(1, None) if (mask >> i) & 1 else 0
                    for i in range(nsites))
        block = coeffs[sel]
        support_idx = [i for i in range(nsites) if (mask >> i) & 1]
        if not support_idx:
            c = complex(block) * id_factor ** nsites
            if abs(c) > abs_tol:
                pot.scalars[nvec] = pot.scalars.get(nvec, 0.0) + c
            continue
        if np.abs(block).max() <= abs_tol:
            continue
        matrix = coefficients_to_matrix(block, len(support_idx), d)
        matrix = matrix * id_factor ** (nsites - len(support_idx))
        zone = tuple(graph.sites[i] for i in support_idx)
        pot._insert(zone, nvec, matrix)


def decompose_with_alias_check(sampler, graph: SiteGraph, m: int,
                               start_shape, alias_tol: float = ALIAS_TOL,
                               kappa: float = 0.5, max_doublings: int = 4):
    """Decompose a family given by ``sampler(grid_shape) -> GridOperatorFamily``,
    doubling the grid until the kappa-norm of the decomposition is stable."""
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
    raise ValueError("aliasing check failed: kappa-norm did not stabilize")


def kappa_norm(phi: ColoredPotential, kappa: float) -> float:
    return phi.kappa_norm(kappa)
