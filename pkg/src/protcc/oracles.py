"""Independent reference implementations used to cross-check the fast paths.

Everything here works from plain Python sets and loops over the complex's
edge and cell lists. Nothing calls into ``scipy.sparse`` or the matrix
builders in ``complex``.
"""

import numpy as np

from .complex import ProteinCC


def cell_sets(cc: ProteinCC, rank: int) -> list:
    """Rank-r cells as frozensets of residues (edges as their endpoint pair)."""
    if rank == 0:
        return [frozenset([i]) for i in range(cc.num_nodes)]
    if rank == 1:
        return [frozenset(map(int, e)) for e in cc.edges]
    if rank == 2:
        return [frozenset(map(int, c)) for c in cc.sse_cells]
    return [frozenset(range(cc.num_nodes))]


def incidence_dense(cc: ProteinCC, r: int, rp: int) -> np.ndarray:
    """B^{r->rp} from the set definitions."""
    out = np.zeros((cc.size(r), cc.size(rp)), dtype=np.int64)
    if (r, rp) == (0, 1):
        for e, (src, _) in enumerate(cc.edges):
            out[src, e] = 1
        return out
    if (r, rp) == (1, 0):
        for e, (_, dst) in enumerate(cc.edges):
            out[e, dst] = 1
        return out
    big, small = (r, rp) if r > rp else (rp, r)
    bigs, smalls = cell_sets(cc, big), cell_sets(cc, small)
    for a, x in enumerate(bigs):
        for b, y in enumerate(smalls):
            if y <= x:
                if r > rp:
                    out[a, b] = 1
                else:
                    out[b, a] = 1
    return out


def laplacian_dense(cc: ProteinCC, r: int, via: int) -> np.ndarray:
    """Triple loop product B^{r->via} B^{via->r}."""
    b, bt = incidence_dense(cc, r, via), incidence_dense(cc, via, r)
    n, m = b.shape
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            out[i, j] = sum(int(b[i, k]) * int(bt[k, j]) for k in range(m))
    return out


def shared_cells_dense(cc: ProteinCC, r: int, via: int) -> np.ndarray:
    """Adjacency as counted shared via-cells, diagonal zeroed (containment ranks only)."""
    cells, vias = cell_sets(cc, r), cell_sets(cc, via)
    n = len(cells)
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if via > r:
                out[i, j] = sum(1 for v in vias if cells[i] <= v and cells[j] <= v)
            else:
                out[i, j] = sum(1 for v in vias if v <= cells[i] and v <= cells[j])
    return out


def outer_dense(cc: ProteinCC):
    """(leaving, entering, bridging) edge sets per 2-cell as dense 0/1 arrays."""
    cells = cell_sets(cc, 2)
    owner = {i: k for k, c in enumerate(cells) for i in c}
    shape = (len(cells), cc.num_edges)
    leaving, entering, bridging = (np.zeros(shape, dtype=np.int64) for _ in range(3))
    for k, c in enumerate(cells):
        for e, (src, dst) in enumerate(cc.edges):
            src, dst = int(src), int(dst)
            if src in c and dst not in c:
                leaving[k, e] = 1
                if dst in owner:
                    bridging[k, e] = 1
            if dst in c and src not in c:
                entering[k, e] = 1
    return leaving, entering, bridging


def dense_triplets(m) -> list:
    """Nonzero ``(row, col, value)`` of a dense array in row-major order."""
    m = np.asarray(m)
    return [(i, j, m[i, j].item()) for i in range(m.shape[0]) for j in range(m.shape[1]) if m[i, j]]


def loop_mean(triplets, values, num_rows) -> np.ndarray:
    """Row means of ``values`` over triplet supports, one accumulation at a time."""
    values = np.asarray(values)
    flat = values.reshape(values.shape[0], int(np.prod(values.shape[1:])))
    out = np.zeros((num_rows, flat.shape[1]), dtype=values.dtype)
    counts = [0] * num_rows
    for row, col, v in triplets:
        for f in range(flat.shape[1]):
            out[row, f] += v * flat[col, f]
        counts[row] += 1
    for row in range(num_rows):
        if counts[row]:
            out[row] /= values.dtype.type(counts[row])
    return out.reshape((num_rows,) + values.shape[1:])
