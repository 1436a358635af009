"""Protein combinatorial complex: cells of ranks 0-3 and their neighborhood matrices.

Rank 0 cells are residues, rank 1 cells are directed kNN edges, rank 2 cells
are secondary-structure runs and the single rank 3 cell is the protein.
Edges are stored as ``(source, target)`` pairs; a kNN edge points from a
neighbour toward the query residue.

All neighborhood matrices are ``scipy.sparse.csr_matrix`` of int64 with
sorted column indices. Shapes follow ``B^{r->r'}`` in
``{0,1}^{|X_r| x |X_r'|}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import SameRank, TooFewNodes
from .structure_io import AnnotationTrack, ProteinStructure

DEFAULT_K = 16
DEFAULT_MIN_SSE = 3


def build_knn_edges(coords, k: int = DEFAULT_K) -> np.ndarray:
    """Directed edges ``(j, i)`` from the k nearest neighbours j of every node i.

    ``k`` is clamped to N-1. Ties in distance go to the smaller index. The
    result is sorted by target, then source.
    """
    x = np.asarray(coords, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise TooFewNodes(f"kNN graph needs at least 2 nodes, got {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    kk = min(k, n - 1)
    diff = x[:, None, :] - x[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    if kk < n - 1:
        part = np.argpartition(d2, kk, axis=1)[:, : kk + 1]
        # re-rank the candidate set (plus one spare) exactly, then resolve ties by index
        cand_d = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, cand_d), axis=1)
        nbrs = np.take_along_axis(part, order, axis=1)[:, :kk]
        kth = np.take_along_axis(cand_d, order, axis=1)[:, kk - 1]
        # a tie at the k-th distance may involve nodes outside the candidate set
        ties = np.count_nonzero(d2 <= kth[:, None], axis=1) > kk
        for i in np.nonzero(ties)[0]:
            nbrs[i] = np.lexsort((np.arange(n), d2[i]))[:kk]
    else:
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, :kk]
    nbrs = np.sort(nbrs, axis=1)
    targets = np.repeat(np.arange(n), kk)
    return np.stack([nbrs.ravel(), targets], axis=1).astype(np.int64)


def build_sse_cells(labels, min_size: int = DEFAULT_MIN_SSE, chain_ids=None):
    """Maximal same-label runs of at least ``min_size`` residues.

    Runs never cross a chain boundary. Coil runs form cells too.
    Returns ``(cells, cell_labels)`` ordered by start index.
    """
    labels = list(labels.labels if isinstance(labels, AnnotationTrack) else labels)
    n = len(labels)
    cells, cell_labels = [], []
    start = 0
    for i in range(1, n + 1):
        boundary = (i == n or labels[i] != labels[start]
                    or (chain_ids is not None and chain_ids[i] != chain_ids[start]))
        if boundary:
            if i - start >= min_size:
                cells.append(np.arange(start, i, dtype=np.int64))
                cell_labels.append(labels[start])
            start = i
    return cells, cell_labels


def _csr(rows, cols, shape) -> sp.csr_matrix:
    data = np.ones(len(rows), dtype=np.int64)
    m = sp.csr_matrix((data, (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                      shape=shape, dtype=np.int64)
    m.sum_duplicates()
    m.sort_indices()
    return m


def _clean(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.int64)
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class ProteinCC:
    """Immutable combinatorial complex of one protein.

    ``coords`` holds the CA positions the kNN graph was built from; the
    frames and features downstream read positions from here.
    """

    num_nodes: int
    edges: np.ndarray
    sse_cells: tuple = ()
    sse_labels: tuple = ()
    coords: Optional[np.ndarray] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loop edge")
            if len({tuple(e) for e in edges.tolist()}) != len(edges):
                raise ValueError("duplicate edge")
            if edges.min() < 0 or edges.max() >= self.num_nodes:
                raise ValueError("edge endpoint out of range")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        cells = tuple(np.asarray(c, dtype=np.int64) for c in self.sse_cells)
        seen = np.zeros(self.num_nodes, dtype=bool)
        for c in cells:
            if np.any(seen[c]):
                raise ValueError("2-cells must be pairwise disjoint")
            seen[c] = True
            c.setflags(write=False)
        object.__setattr__(self, "sse_cells", cells)
        object.__setattr__(self, "sse_labels", tuple(self.sse_labels))
        if self.coords is not None:
            coords = np.array(self.coords, dtype=float)
            coords.setflags(write=False)
            object.__setattr__(self, "coords", coords)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def num_sse(self) -> int:
        return len(self.sse_cells)

    @property
    def protein_cell(self) -> np.ndarray:
        return np.arange(self.num_nodes)

    def size(self, rank: int) -> int:
        return (self.num_nodes, self.num_edges, self.num_sse, 1)[rank]

    @property
    def cell_of_node(self) -> np.ndarray:
        """Index of the 2-cell containing each residue, -1 if none."""
        if "cell_of_node" not in self._cache:
            out = np.full(self.num_nodes, -1, dtype=np.int64)
            for k, c in enumerate(self.sse_cells):
                out[c] = k
            out.setflags(write=False)
            self._cache["cell_of_node"] = out
        return self._cache["cell_of_node"]

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]


def build_pcc(s: ProteinStructure, labels, k: int = DEFAULT_K,
              min_size: int = DEFAULT_MIN_SSE) -> ProteinCC:
    """Assemble residues, kNN edges, SSE cells and the protein cell."""
    coords = s.ca
    edges = build_knn_edges(coords, k)
    cells, cell_labels = build_sse_cells(labels, min_size, s.chain_ids)
    return ProteinCC(len(s), edges, tuple(cells), tuple(cell_labels), coords)


# ---------------------------------------------------------------------------
# Incidence / adjacency algebra
# ---------------------------------------------------------------------------

def _incidence_down(cc: ProteinCC, r: int, rp: int) -> sp.csr_matrix:
    """Containment matrix for r > rp (rows: rank-r cells)."""
    n, e, c = cc.num_nodes, cc.num_edges, cc.num_sse
    if r == 3:
        return _csr(np.zeros(cc.size(rp), dtype=np.int64), np.arange(cc.size(rp)), (1, cc.size(rp)))
    if r == 2 and rp == 0:
        rows = np.concatenate([np.full(len(cell), k) for k, cell in enumerate(cc.sse_cells)] or [[]])
        cols = np.concatenate(list(cc.sse_cells) or [[]])
        return _csr(rows, cols, (c, n))
    if r == 2 and rp == 1:
        owner = cc.cell_of_node
        src, dst = owner[cc.edges[:, 0]], owner[cc.edges[:, 1]]
        inner = (src >= 0) & (src == dst)
        return _csr(src[inner], np.nonzero(inner)[0], (c, e))
    raise ValueError(f"no containment rule for {r}->{rp}")


def incidence(cc: ProteinCC, r: int, rp: int) -> sp.csr_matrix:
    """Incidence matrix ``B^{r->rp}``.

    Between ranks 0 and 1 the direction matters: ``B^{0->1}[i, e] = 1`` iff
    edge e leaves i, ``B^{1->0}[e, j] = 1`` iff e enters j. All other pairs
    are set containment and ``B^{rp->r}`` is the transpose of ``B^{r->rp}``.
    """
    if r == rp:
        raise SameRank(f"incidence needs two different ranks, got {r}")
    if not (0 <= r <= 3 and 0 <= rp <= 3):
        raise ValueError("ranks must lie in 0..3")

    def build():
        n, e = cc.num_nodes, cc.num_edges
        if (r, rp) == (0, 1):
            return _csr(cc.edges[:, 0], np.arange(e), (n, e))
        if (r, rp) == (1, 0):
            return _csr(np.arange(e), cc.edges[:, 1], (e, n))
        if r > rp:
            return _incidence_down(cc, r, rp)
        return _clean(_incidence_down(cc, rp, r).T)

    return cc.cached(("B", r, rp), build)


def laplacian(cc: ProteinCC, r: int, via: int) -> sp.csr_matrix:
    """``L^{r~via} = B^{r->via} . B^{via->r}``."""
    if r == via:
        raise SameRank(f"laplacian needs two different ranks, got {r}")
    return cc.cached(("L", r, via),
                     lambda: _clean(incidence(cc, r, via) @ incidence(cc, via, r)))


def degree(cc: ProteinCC, r: int, via: int) -> sp.csr_matrix:
    """Diagonal part of the Laplacian."""
    return cc.cached(("D", r, via), lambda: _clean(sp.diags(laplacian(cc, r, via).diagonal())))


def adjacency(cc: ProteinCC, r: int, via: int) -> sp.csr_matrix:
    """``A^{r~via} = L^{r~via} - D^{r~via}``: counts of shared via-cells, zero diagonal."""
    return cc.cached(("A", r, via), lambda: _clean(laplacian(cc, r, via) - degree(cc, r, via)))


def outer_neighborhoods(cc: ProteinCC):
    """Outer-edge neighborhoods of the 2-cells.

    Returns ``(outer, outer_in_t, bridging)``, all of shape (n_sse, n_edges):

    ``outer = B20 B01 - B21``
        edges leaving the cell (source inside, target outside);
    ``outer_in_t = B20 B10^T - B21``
        edges entering the cell (target inside, source outside);
    ``bridging``
        rows of ``outer`` restricted to edges that also enter some other
        2-cell, i.e. edges running from this SSE into a different SSE.

    Negative entries from the subtraction are clamped to zero.
    """
    def build():
        b20 = incidence(cc, 2, 0)
        b21 = incidence(cc, 2, 1)
        out = b20 @ incidence(cc, 0, 1) - b21
        inn = b20 @ incidence(cc, 1, 0).T - b21
        out = _clean(out.maximum(0))
        inn = _clean(inn.maximum(0))
        enters_some_cell = np.asarray(inn.sum(axis=0)).ravel() > 0
        bridging = _clean(out @ sp.diags(enters_some_cell.astype(np.int64)))
        return out, inn, bridging

    return cc.cached("outer", build)


def triplets(m) -> list:
    """Sorted ``(row, col, value)`` triplets of a sparse matrix."""
    coo = sp.coo_matrix(m)
    order = np.lexsort((coo.col, coo.row))
    return [(int(coo.row[k]), int(coo.col[k]), coo.data[k].item()) for k in order]
