"""Exact many-body operator arithmetic on small site graphs.

Operators are kept as dense matrices on an explicit support set and embedded
into larger regions (or the full Hilbert space) on demand.  The site ordering
of the graph fixes every tensor-product convention, so all matrix
representations are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np

__all__ = [
    "SiteGraph",
    "LocalOperator",
    "StrongSupportCertificate",
    "DimensionCapError",
    "embed_operator",
    "embed_in_region",
    "commutator",
    "op_norm",
    "validate_strong_support",
]


class DimensionCapError(RuntimeError):
    """Raised when a dense matrix would exceed the configured Hilbert cap."""


@dataclass(frozen=True)
class SiteGraph:
    """Finite site graph with uniform local dimension.

    sites are arbitrary hashable identifiers; their order in ``sites`` fixes
    the tensor-product ordering of all embeddings.
    """

    sites: tuple
    edges: tuple
    local_dim: int = 2
    dim_cap: int = 4096
    spatial_dim: int = 1

    def __post_init__(self):
        if self.local_dim < 2:
            raise ValueError("local_dim must be >= 2")
        if self.full_dim > self.dim_cap:
            raise DimensionCapError(
                f"Hilbert dimension {self.local_dim}^{len(self.sites)} exceeds cap {self.dim_cap}"
            )
        for a, b in self.edges:
            if a not in self.sites or b not in self.sites:
                raise ValueError(f"edge ({a}, {b}) references unknown site")

    @property
    def full_dim(self) -> int:
        return self.local_dim ** len(self.sites)

    @property
    def nsites(self) -> int:
        return len(self.sites)

    def index(self, site) -> int:
        return self.sites.index(site)

    def sorted_sites(self, subset):
        """Subset of sites in graph order."""
        order = {s: i for i, s in enumerate(self.sites)}
        return tuple(sorted(subset, key=order.__getitem__))

    def _nx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.sites)
        g.add_edges_from(self.edges)
        return g

    def distance(self, a, b) -> int:
        return nx.shortest_path_length(self._nx(), a, b)

    def diameter(self, subset) -> int:
        subset = list(subset)
        if len(subset) <= 1:
            return 0
        g = self._nx()
        return max(
            nx.shortest_path_length(g, a, b)
            for i, a in enumerate(subset)
            for b in subset[i + 1:]
        )

    def is_connected_set(self, subset) -> bool:
        subset = set(subset)
        if len(subset) <= 1:
            return True
        return nx.is_connected(self._nx().subgraph(subset))

    def connected_superset(self, subset):
        """Smallest connected superset of ``subset`` (deterministic).

        Components are joined greedily along shortest paths; ties are broken
        by site order.  Exact on path graphs (interval hull).
        """
        subset = set(subset)
        if not subset:
            return tuple()
        if self.is_connected_set(subset):
            return self.sorted_sites(subset)
        g = self._nx()
        order = {s: i for i, s in enumerate(self.sites)}
        grown = set(subset)
        while not self.is_connected_set(grown):
            comps = sorted(
                (sorted(c, key=order.__getitem__) for c in
                 nx.connected_components(g.subgraph(grown))),
                key=lambda c: order[c[0]],
            )
            base = set(comps[0])
            best = None
            for comp in comps[1:]:
                for a in sorted(base, key=order.__getitem__):
                    for b in comp:
                        path = nx.shortest_path(g, a, b)
                        key = (len(path), [order[s] for s in path])
                        if best is None or key < best[0]:
                            best = (key, path)
            grown.update(best[1])
        return self.sorted_sites(grown)


def chain_graph(length: int, local_dim: int = 2, periodic: bool = False,
                dim_cap: int = 4096) -> SiteGraph:
    """Open (or periodic) chain of ``length`` sites labeled 0..length-1."""
    sites = tuple(range(length))
    edges = [(i, i + 1) for i in range(length - 1)]
    if periodic and length > 2:
        edges.append((length - 1, 0))
    return SiteGraph(sites=sites, edges=tuple(edges), local_dim=local_dim,
                     dim_cap=dim_cap)


@dataclass(frozen=True)
class LocalOperator:
    """Dense matrix on an explicit, ordered support set of sites."""

    support: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")

    def check_dim(self, graph: SiteGraph):
        want = graph.local_dim ** len(self.support)
        if self.matrix.shape[0] != want:
            raise ValueError(
                f"matrix dim {self.matrix.shape[0]} != d^|S| = {want}")

    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T)


@dataclass(frozen=True)
class StrongSupportCertificate:
    operator: LocalOperator
    residuals: tuple
    tol: float

    @property
    def valid(self) -> bool:
        return all(r <= self.tol for _, r in self.residuals)

    @property
    def max_residual(self) -> float:
        return max((r for _, r in self.residuals), default=0.0)


@lru_cache(maxsize=256)
def _embed_perm(npos: int, positions: tuple, d: int):
    """Axis permutation placing operator factors at ``positions`` in a region."""
    rest = [p for p in range(npos) if p not in positions]
    src = list(positions) + rest
    perm = [src.index(p) for p in range(npos)]
    return perm + [npos + p for p in perm]


def embed_in_region(matrix: np.ndarray, positions, region_len: int, d: int) -> np.ndarray:
    """Embed a matrix acting on ``positions`` (indices into an ordered region)
    as ``M (x) I`` on the whole region, respecting site order."""
    positions = tuple(positions)
    k = len(positions)
    dim_rest = d ** (region_len - k)
    full = np.kron(matrix, np.eye(dim_rest))
    if k == region_len or all(positions[i] == i for i in range(k)):
        if positions == tuple(range(k)):
            return full
    perm = _embed_perm(region_len, positions, d)
    t = full.reshape((d,) * (2 * region_len))
    return t.transpose(perm).reshape(d ** region_len, d ** region_len)


def embed_operator(op: LocalOperator, graph: SiteGraph) -> np.ndarray:
    """Full-space dense matrix acting as ``op`` on its support, identity else."""
    if not set(op.support) <= set(graph.sites):
        raise ValueError(f"support {op.support} not a subset of graph sites")
    op.check_dim(graph)
    if graph.full_dim > graph.dim_cap:
        raise DimensionCapError("dimension cap exceeded")
    positions = tuple(graph.index(s) for s in op.support)
    return embed_in_region(op.matrix, positions, graph.nsites, graph.local_dim)


def restrict_to_region(op: LocalOperator, region, graph: SiteGraph) -> np.ndarray:
    """Matrix of ``op`` embedded in an ordered site region containing its support."""
    region = tuple(region)
    positions = tuple(region.index(s) for s in op.support)
    return embed_in_region(op.matrix, positions, len(region), graph.local_dim)


def commutator(a: LocalOperator, b: LocalOperator, graph: SiteGraph) -> LocalOperator:
    """[a, b] as a LocalOperator on the union support.

    Disjoint supports short-circuit to the zero operator without forming
    matrices.
    """
    union = graph.sorted_sites(set(a.support) | set(b.support))
    d = graph.local_dim
    if not (set(a.support) & set(b.support)):
        return LocalOperator(union, np.zeros((d ** len(union),) * 2))
    am = restrict_to_region(a, union, graph)
    bm = restrict_to_region(b, union, graph)
    return LocalOperator(union, am @ bm - bm @ am)


def op_norm(op) -> float:
    """Largest singular value (spectral norm)."""
    m = op.matrix if isinstance(op, LocalOperator) else np.asarray(op)
    if m.size == 0 or not np.any(m):
        return 0.0
    return float(np.linalg.norm(m, 2))


def validate_strong_support(op: LocalOperator, charge, tol: float = 1e-12,
                            graph: SiteGraph | None = None) -> StrongSupportCertificate:
    """Certificate that ``op`` commutes with every charge term not inside its
    support set."""
    graph = graph or charge.graph
    s = set(op.support)
    residuals = []
    for term in charge.terms:
        if set(term.support) <= s:
            continue
        residuals.append((term.support, op_norm(commutator(op, term, graph))))
    return StrongSupportCertificate(op, tuple(residuals), tol)
