"""Undirected simple graphs and label vectors.

Nodes are indexed ``0..n-1``. Community labels are integers in ``1..k``;
``0`` is reserved for the unassigned placeholder used by leave-one-out
assignments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Raised for invalid graph construction or node references."""


class LabelError(ValueError):
    """Raised for malformed label vectors."""


@dataclass(frozen=True)
class BuildStats:
    input_pairs: int = 0
    dropped_loops: int = 0
    duplicates: int = 0


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph.

    ``edges`` holds each edge once as a row ``(u, v)`` with ``u < v``, sorted
    lexicographically. Neighbor lists are kept in CSR form (``indptr``,
    ``indices``) with sorted neighbors.
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    stats: BuildStats = field(default_factory=BuildStats, repr=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr).astype(np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.size and nb[i] == v)

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1
            a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def to_sparse(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))


def _from_canonical(n: int, edges: np.ndarray, stats: BuildStats) -> Graph:
    # edges: unique rows with u < v, lexicographically sorted
    if edges.size == 0:
        edges = np.zeros((0, 2), dtype=np.int64)
    both = np.concatenate([edges, edges[:, ::-1]]) if edges.size else edges
    order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.zeros(0, dtype=np.int64)
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=n) if both.size else np.zeros(n, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = both[:, 1].astype(np.int64) if both.size else np.zeros(0, dtype=np.int64)
    edges = np.ascontiguousarray(edges, dtype=np.int64)
    for arr in (edges, indptr, indices):
        arr.setflags(write=False)
    return Graph(n=n, edges=edges, indptr=indptr, indices=indices, stats=stats)


def build_graph(n: int, edge_list: Iterable[tuple[int, int]] | np.ndarray) -> Graph:
    """Build a simple undirected graph on ``n`` nodes.

    Reversed and repeated pairs collapse to one edge and self-loops are
    dropped; both are counted in ``graph.stats``.
    """
    if n < 0:
        raise GraphError(f"node count must be nonnegative, got {n}")
    pairs = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list,
                       dtype=np.int64)
    if pairs.size == 0:
        pairs = pairs.reshape(0, 2)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise GraphError("edge list must be a sequence of pairs")
    bad = np.flatnonzero((pairs < 0).any(axis=1) | (pairs >= n).any(axis=1))
    if bad.size:
        u, v = pairs[bad[0]]
        raise GraphError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
    loops = pairs[:, 0] == pairs[:, 1]
    kept = np.sort(pairs[~loops], axis=1)
    uniq = np.unique(kept, axis=0) if kept.size else kept.reshape(0, 2)
    stats = BuildStats(
        input_pairs=int(pairs.shape[0]),
        dropped_loops=int(loops.sum()),
        duplicates=int(kept.shape[0] - uniq.shape[0]),
    )
    return _from_canonical(n, uniq, stats)


def from_dense(a: np.ndarray) -> Graph:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise GraphError("adjacency matrix must be square")
    iu, iv = np.nonzero(np.triu(a != 0, k=1) | np.triu(a.T != 0, k=1))
    return build_graph(a.shape[0], np.column_stack([iu, iv]))


def degrees(g: Graph) -> np.ndarray:
    return g.degrees()


def average_degree(g: Graph) -> float:
    """Mean degree ``2|E|/n``."""
    if g.n == 0:
        raise GraphError("average degree undefined for an empty node set")
    return 2.0 * g.num_edges / g.n


def induced_subgraph(g: Graph, nodes: np.ndarray) -> Graph:
    """Subgraph induced on ``nodes`` (sorted, unique), relabeled by rank."""
    nodes = np.asarray(nodes, dtype=np.int64)
    new_index = np.full(g.n, -1, dtype=np.int64)
    new_index[nodes] = np.arange(nodes.size)
    e = new_index[g.edges] if g.num_edges else g.edges
    keep = (e >= 0).all(axis=1) if e.size else np.zeros(0, dtype=bool)
    # order-preserving relabeling keeps u < v and lexicographic order
    return _from_canonical(int(nodes.size), e[keep], BuildStats())


def subgraph_excluding(g: Graph, u: int) -> tuple[Graph, np.ndarray]:
    """Remove node ``u``; returns the graph on ``n-1`` nodes and the map
    from new index to original index."""
    if not 0 <= u < g.n:
        raise GraphError(f"node {u} outside [0, {g.n})")
    keep = np.delete(np.arange(g.n, dtype=np.int64), u)
    return induced_subgraph(g, keep), keep


def largest_connected_component(g: Graph) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on the largest connected component.

    Ties go to the component containing the smallest original index.
    Returns the subgraph and the old-to-new index map.
    """
    if g.n == 0:
        raise GraphError("empty graph has no components")
    _, comp = connected_components(g.to_sparse(), directed=False)
    sizes = np.bincount(comp)
    first = np.full(sizes.size, g.n, dtype=np.int64)
    np.minimum.at(first, comp, np.arange(g.n))
    best = int(np.lexsort((first, -sizes))[0])
    nodes = np.flatnonzero(comp == best)
    sub = induced_subgraph(g, nodes)
    return sub, {int(old): new for new, old in enumerate(nodes)}


def check_labels(labels, k: int, n: int | None = None, partial: bool = False) -> np.ndarray:
    """Validate a label vector over ``1..k`` and return it as an int array.

    With ``partial=True`` the placeholder ``0`` is allowed.
    """
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise LabelError("labels must be one-dimensional")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise LabelError("labels must be integers")
    arr = arr.astype(np.int64)
    if n is not None and arr.size != n:
        raise LabelError(f"expected {n} labels, got {arr.size}")
    lo = 0 if partial else 1
    if arr.size and (arr.min() < lo or arr.max() > k):
        raise LabelError(f"labels must lie in [{lo}, {k}]")
    return arr


def community_sizes(labels: np.ndarray, k: int) -> np.ndarray:
    """Sizes of communities ``1..k``; placeholder zeros are ignored."""
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=k + 1)[1:k + 1]
