"""Local orthonormal frames and scalarization.

A frame is a (3, 3) array whose rows are the axes. Every constructor returns
a right-handed orthonormal basis, including the degenerate fallbacks.
All inputs are expected to be centred at the protein centre of mass.
"""

import numpy as np

from .complex import ProteinCC, incidence, outer_neighborhoods
from .errors import CoincidentPoints, DegenerateCloud, IsolatedNode, ZeroCom
from .geometry import EPS, sorted_eigh, unit

_BASIS = np.eye(3)


def _complete(axis1):
    """Right-handed frames whose first axis is ``axis1`` (..., 3), built by Gram-Schmidt
    against the canonical basis vector least aligned with it."""
    axis1 = np.atleast_2d(axis1)
    k = np.argmin(np.abs(axis1), axis=-1)
    e = _BASIS[k]
    a2 = unit(e - np.sum(e * axis1, axis=-1, keepdims=True) * axis1)
    a3 = np.cross(axis1, a2)
    return np.stack([axis1, a2, a3], axis=-2)


def _frames_from(axis1, cross):
    """Rows (axis1, unit(cross), axis1 x unit(cross)); falls back where ``cross`` vanishes."""
    axis1 = np.atleast_2d(axis1)
    cross = np.atleast_2d(cross)
    norm = np.linalg.norm(cross, axis=-1)
    degenerate = norm < EPS
    a2 = cross / np.where(degenerate, 1.0, norm)[:, None]
    a3 = np.cross(axis1, a2)
    out = np.stack([axis1, a2, a3], axis=-2)
    if degenerate.any():
        out[degenerate] = _complete(axis1[degenerate])
    return out


def edge_frames(x_src, x_dst):
    """Batched edge frames for edges pointing from ``x_src`` to ``x_dst``.

    axis1 = unit(x_dst - x_src), axis2 = unit(x_dst x x_src), axis3 = axis1 x axis2.
    """
    x_src = np.atleast_2d(np.asarray(x_src, dtype=float))
    x_dst = np.atleast_2d(np.asarray(x_dst, dtype=float))
    d = x_dst - x_src
    dn = np.linalg.norm(d, axis=-1)
    if np.any(dn < EPS):
        raise CoincidentPoints("edge endpoints coincide")
    return _frames_from(d / dn[:, None], np.cross(x_dst, x_src))


def edge_frame(x_i, x_j):
    """Frame of the directed edge i -> j."""
    return edge_frames(x_i, x_j)[0]


def scalarize(vectors, frame):
    """Project a (d, 3) block onto a frame; returns the 3d row-major flattening of V F^T."""
    v = np.asarray(vectors, dtype=float).reshape(-1, 3)
    return (v @ np.asarray(frame).T).ravel()


def scalarize_batch(vectors, frames):
    """Row-wise scalarization: (n, d, 3) vectors against (n, 3, 3) frames -> (n, 3d)."""
    out = np.matmul(vectors, np.swapaxes(frames, 1, 2))
    return out.reshape(out.shape[0], -1)


def mean_frames(matrix, frames, fallback=None):
    """Per-row average of edge frames over the support of a 0/1 matrix.

    Because scalarization is linear in the frame, projecting onto the mean
    frame equals the mean of the individual projections. Rows with empty
    support take ``fallback`` (a single frame) or raise ``IsolatedNode``.
    """
    counts = np.asarray(matrix.sum(axis=1)).ravel()
    total = np.asarray(matrix @ frames.reshape(frames.shape[0], 9))
    empty = counts == 0
    if empty.any() and fallback is None:
        raise IsolatedNode(f"{int(empty.sum())} cell(s) have no incident edge")
    out = total / np.where(empty, 1, counts)[:, None]
    if empty.any():
        out[empty] = np.asarray(fallback).ravel()
    return out.reshape(-1, 3, 3)


def node_frames(cc: ProteinCC, frames_by_edge, fallback=None):
    """Rank-0 scalarization frames: mean over each node's outgoing edges."""
    return mean_frames(incidence(cc, 0, 1), frames_by_edge, fallback)


def sse_frames(cc: ProteinCC, frames_by_edge, protein_frame_):
    """Rank-2 scalarization frames: mean over edges bridging into other SSEs,
    the protein frame where a cell has none."""
    return mean_frames(outer_neighborhoods(cc)[2], frames_by_edge, protein_frame_)


def scalarize_rank0(node_vectors, cc: ProteinCC, frames_by_edge, fallback=None):
    frames = node_frames(cc, frames_by_edge, fallback)
    return scalarize_batch(np.asarray(node_vectors, dtype=float), frames)


def scalarize_rank2(sse_vectors, cc: ProteinCC, frames_by_edge, protein_frame_):
    frames = sse_frames(cc, frames_by_edge, protein_frame_)
    return scalarize_batch(np.asarray(sse_vectors, dtype=float), frames)


# ---------------------------------------------------------------------------
# PCA frames
# ---------------------------------------------------------------------------

def farthest_point(centered):
    """Position of the point farthest from the origin (first one on ties)."""
    centered = np.asarray(centered, dtype=float)
    return centered[int(np.argmax(np.einsum("ij,ij->i", centered, centered)))]


def disambiguate_signs(vectors, anchor, tol=1e-12):
    """Flip each row so that its dot product with ``anchor`` is non-negative.

    A dot product within ``tol`` of zero falls back to making the first
    nonzero component positive.
    """
    vectors = np.array(vectors, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    scale = max(np.linalg.norm(anchor), 1.0)
    for k, v in enumerate(vectors):
        dot = float(v @ anchor)
        if abs(dot) <= tol * scale:
            nz = np.nonzero(np.abs(v) > tol)[0]
            sign = np.sign(v[nz[0]]) if len(nz) else 1.0
        else:
            sign = np.sign(dot)
        vectors[k] = sign * v
    return vectors


def covariance(points):
    p = np.asarray(points, dtype=float)
    c = p - p.mean(axis=0)
    return c.T @ c / p.shape[0]


def protein_frame(centered_ca, anchor=None):
    """Principal axes of the CA cloud, sign-fixed toward the farthest residue.

    The axes are re-orthonormalized and axis 3 is flipped if needed so the
    frame is right-handed.
    """
    pts = np.asarray(centered_ca, dtype=float)
    if pts.shape[0] < 3:
        raise DegenerateCloud("protein frame needs at least 3 points")
    vals, vecs = sorted_eigh(covariance(pts))
    if vals[0] <= 0 or vals[1] <= 1e-10 * vals[0]:
        raise DegenerateCloud("CA covariance has rank < 2")
    if anchor is None:
        anchor = farthest_point(pts - pts.mean(axis=0))
    vecs = disambiguate_signs(vecs, anchor)
    a1 = unit(vecs[0])
    a2 = unit(vecs[1] - (vecs[1] @ a1) * a1)
    a3 = vecs[2] - (vecs[2] @ a1) * a1 - (vecs[2] @ a2) * a2
    a3 = unit(a3)
    if np.dot(np.cross(a1, a2), a3) < 0:
        a3 = -a3
    return np.stack([a1, a2, a3])


def robust_protein_frame(centered_ca):
    """``protein_frame`` with a fallback for clouds of rank < 2.

    A line-like cloud keeps its disambiguated principal axis and completes
    it with a canonical-basis Gram-Schmidt; a single point gives the identity.
    """
    pts = np.asarray(centered_ca, dtype=float)
    try:
        return protein_frame(pts)
    except DegenerateCloud:
        pass
    vals, vecs = sorted_eigh(covariance(pts))
    if vals[0] <= EPS ** 2:
        return np.eye(3)
    axis1 = disambiguate_signs(vecs[:1], farthest_point(pts - pts.mean(axis=0)))[0]
    return _complete(unit(axis1))[0]


# ---------------------------------------------------------------------------
# Alternative constructions (single-cell frames)
# ---------------------------------------------------------------------------

def node_com_frame(x_i, neighbor_coords):
    """Frame from a node and the centre of mass of its neighbours.

    axis1 = unit(xbar - x_i), axis2 = unit(xbar x x_i). When the neighbour
    centre coincides with the node, axis1 falls back to unit(x_i).
    """
    x_i = np.asarray(x_i, dtype=float)
    nbrs = np.atleast_2d(np.asarray(neighbor_coords, dtype=float))
    if nbrs.shape[0] == 0:
        raise ValueError("node_com_frame needs at least one neighbour")
    xbar = nbrs.mean(axis=0)
    d = xbar - x_i
    if np.linalg.norm(d) < EPS:
        if np.linalg.norm(x_i) < EPS:
            raise CoincidentPoints("node, neighbour centre and origin coincide")
        d = x_i
    return _frames_from(unit(d), np.cross(xbar, x_i))[0]


def sse_com_anchor_frame(sse_com, anchor):
    """Frame from an SSE centre (relative to the protein centre) and an anchor.

    axis1 = unit(-com), axis2 = unit(anchor x com).
    """
    com = np.asarray(sse_com, dtype=float)
    if np.linalg.norm(com) < EPS:
        raise ZeroCom("SSE centre coincides with the protein centre")
    return _frames_from(unit(-com), np.cross(np.asarray(anchor, dtype=float), com))[0]


def is_rotation(frame, tol=1e-6) -> bool:
    f = np.asarray(frame)
    return bool(np.allclose(f @ f.T, np.eye(3), atol=tol) and abs(np.linalg.det(f) - 1) < tol)
