"""Scalar and vector features for all four ranks of a protein complex.

Widths (scalar, vector channels) per rank:

====  ======  =======
rank  scalar  vector
====  ======  =======
0     70      3
1     17      1
2     38      14
3     47      23
====  ======  =======

Every position-dependent quantity is computed on CA coordinates translated
so that the protein centre of mass is the origin. Displacement vectors are
unit-normalized; magnitudes appear as scalars where they are features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .complex import ProteinCC
from .errors import DegenerateCell, OddDim, ZeroSpectrum
from .frames import covariance, disambiguate_signs, farthest_point, robust_protein_frame
from .geometry import EPS, bond_angle, dihedral, sorted_eigh, unit
from .structure_io import (NUM_AA_CLASSES, SSE3_ALPHABET, THREE_DI_ALPHABET, AnnotationTrack,
                           ProteinStructure)

SCALAR_WIDTHS = (70, 17, 38, 47)
VECTOR_WIDTHS = (3, 1, 14, 23)

PE_NODE = 16
PE_EDGE = 16
PE_SSE = 10
N_EXTREME = 10
CONTACT_CUTOFF = 8.0
CONTACT_MIN_SEPARATION = 3
# eigenvalues below this fraction of the largest are rounding noise (planar cells)
SPECTRUM_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    rank: int
    scalars: np.ndarray  # (num_cells, d_s)
    vectors: np.ndarray  # (num_cells, d_v, 3)

    def __post_init__(self):
        if self.scalars.shape[0] != self.vectors.shape[0]:
            raise ValueError("scalar and vector row counts differ")
        if self.vectors.ndim != 3 or self.vectors.shape[-1] != 3:
            raise ValueError("vectors must have shape (n, d_v, 3)")

    @property
    def num_cells(self) -> int:
        return self.scalars.shape[0]

    @property
    def widths(self):
        return self.scalars.shape[1], self.vectors.shape[1]

    def astype(self, dtype) -> "FeatureBundle":
        return FeatureBundle(self.rank, self.scalars.astype(dtype), self.vectors.astype(dtype))


@dataclass(frozen=True)
class SseGeometry:
    com: np.ndarray
    start_pos: np.ndarray
    end_pos: np.ndarray
    mid_pos: np.ndarray
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # rows, sign-disambiguated


# ---------------------------------------------------------------------------
# Elementary encodings
# ---------------------------------------------------------------------------

def positional_encoding(index, dim: int) -> np.ndarray:
    """Interleaved sinusoid: [sin(x/10000^(2m/dim)), cos(...)] for m < dim/2.

    ``index`` may be a real scalar or array; output has a trailing axis of ``dim``.
    """
    if dim % 2:
        raise OddDim(f"positional encoding dimension must be even, got {dim}")
    x = np.asarray(index, dtype=float)[..., None]
    freq = 10000.0 ** (-np.arange(0, dim, 2, dtype=float) / dim)
    out = np.empty(x.shape[:-1] + (dim,))
    out[..., 0::2] = np.sin(x * freq)
    out[..., 1::2] = np.cos(x * freq)
    return out


def one_hot(indices, width: int, valid=None) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros((len(indices), width))
    mask = np.ones(len(indices), dtype=bool) if valid is None else np.asarray(valid)
    out[np.nonzero(mask)[0], indices[mask]] = 1.0
    return out


def sincos(angles, mask) -> np.ndarray:
    """(n, k) angles -> (n, 2k) [sin a1, cos a1, sin a2, ...]; masked entries give (0, 0)."""
    angles = np.asarray(angles, dtype=float)
    out = np.empty(angles.shape[:-1] + (2 * angles.shape[-1],))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    m = np.repeat(np.asarray(mask, dtype=bool), 2, axis=-1)
    return np.where(m, out, 0.0)


def _shift(arr, offset, chain_ids):
    """arr[i + offset] where that residue exists in the same chain; NaN elsewhere."""
    n = arr.shape[0]
    out = np.full_like(arr, np.nan, dtype=float)
    idx = np.arange(n) + offset
    ok = (idx >= 0) & (idx < n)
    src = np.clip(idx, 0, n - 1)
    ok &= chain_ids[src] == chain_ids
    out[ok] = arr[src[ok]]
    return out


def backbone_dihedrals(s: ProteinStructure):
    """Per-residue (phi, psi, omega) in radians and a presence mask.

    phi_i = (C_{i-1}, N_i, CA_i, C_i); psi_i = (N_i, CA_i, C_i, N_{i+1});
    omega_i = (CA_i, C_i, N_{i+1}, CA_{i+1}). Missing atoms give 0, mask False.
    """
    bb = s.backbone
    ch = s.chain_ids
    N, CA, C = bb[:, 0], bb[:, 1], bb[:, 2]
    prev_c = _shift(C, -1, ch)
    next_n = _shift(N, 1, ch)
    next_ca = _shift(CA, 1, ch)
    quads = [(prev_c, N, CA, C), (N, CA, C, next_n), (CA, C, next_n, next_ca)]
    angles = np.zeros((len(s), 3))
    mask = np.zeros((len(s), 3), dtype=bool)
    for k, q in enumerate(quads):
        ok = ~np.any([np.isnan(p).any(axis=1) for p in q], axis=0)
        mask[:, k] = ok
        if ok.any():
            angles[ok, k] = dihedral(*(p[ok] for p in q))
    return angles, mask


def virtual_angles(ca, chain_ids=None):
    """Per-residue CA-trace angles (alpha, kappa) in radians and a presence mask.

    alpha_i = dihedral(CA_{i-1}, CA_i, CA_{i+1}, CA_{i+2});
    kappa_i = angle at CA_i between CA_{i-2} and CA_{i+2}.
    """
    ca = np.asarray(ca, dtype=float)
    n = ca.shape[0]
    ch = np.zeros(n, dtype=np.int64) if chain_ids is None else np.asarray(chain_ids)
    m1, p1, p2 = _shift(ca, -1, ch), _shift(ca, 1, ch), _shift(ca, 2, ch)
    m2 = _shift(ca, -2, ch)
    angles = np.zeros((n, 2))
    mask = np.zeros((n, 2), dtype=bool)
    ok = ~(np.isnan(m1).any(1) | np.isnan(p1).any(1) | np.isnan(p2).any(1))
    if ok.any():
        angles[ok, 0] = dihedral(m1[ok], ca[ok], p1[ok], p2[ok])
    mask[:, 0] = ok
    ok = ~(np.isnan(m2).any(1) | np.isnan(p2).any(1))
    if ok.any():
        angles[ok, 1] = bond_angle(m2[ok], ca[ok], p2[ok])
    mask[:, 1] = ok
    return angles, mask


def sidechain_directions(s: ProteinStructure) -> np.ndarray:
    """Imputed CA->CB direction from ideal tetrahedral geometry; zero where N or C is missing.

    b = unit(c + n), perp = unit(c x n) with c, n unit bonds from CA; the
    direction is -sqrt(1/3) b - sqrt(2/3) perp.
    """
    bb = s.backbone
    n_vec = unit(np.nan_to_num(bb[:, 0] - bb[:, 1]))
    c_vec = unit(np.nan_to_num(bb[:, 2] - bb[:, 1]))
    bis = unit(c_vec + n_vec)
    perp = unit(np.cross(c_vec, n_vec))
    out = -np.sqrt(1.0 / 3.0) * bis - np.sqrt(2.0 / 3.0) * perp
    missing = np.isnan(bb[:, 0]).any(1) | np.isnan(bb[:, 2]).any(1)
    out[missing] = 0.0
    return out


# ---------------------------------------------------------------------------
# Shape statistics
# ---------------------------------------------------------------------------

def shape_descriptors(eigenvalues, count: int = 5) -> np.ndarray:
    """Eigenvalue shape statistics of a point cloud.

    First five: linearity, planarity, scattering, omnivariance, anisotropy.
    ``count=8`` appends eigenentropy, trace and surface variation.
    """
    if count not in (5, 8):
        raise ValueError("count must be 5 or 8")
    lam = np.asarray(eigenvalues, dtype=float)
    if lam[0] <= 0:
        raise ZeroSpectrum("largest eigenvalue must be positive")
    # the cube root in omnivariance would amplify noise in a vanishing eigenvalue
    lam = np.where(lam <= SPECTRUM_FLOOR * lam[0], 0.0, lam)
    l1, l2, l3 = lam
    total = lam.sum()
    e = lam / total
    out = [
        (l1 - l2) / l1,
        (l2 - l3) / l1,
        l3 / l1,
        float(np.prod(e)) ** (1.0 / 3.0),
        (l1 - l3) / l1,
    ]
    if count == 8:
        nz = e[e > 0]
        out += [0.0 - float(np.sum(nz * np.log(nz))), total, e[2]]
    return np.array(out)


def _safe_shape(eigenvalues, count):
    try:
        return shape_descriptors(eigenvalues, count)
    except ZeroSpectrum:
        return np.zeros(count)


def sse_geometry(cc: ProteinCC, centered_ca, anchor=None) -> list:
    """Centre, endpoints, midpoint residue and disambiguated principal axes per 2-cell."""
    x = np.asarray(centered_ca, dtype=float)
    if anchor is None:
        anchor = farthest_point(x)
    out = []
    for cell in cc.sse_cells:
        pts = x[cell]
        vals, vecs = sorted_eigh(covariance(pts))
        if np.ptp(pts, axis=0).max() < EPS:
            raise DegenerateCell("all residues of the cell coincide")
        out.append(SseGeometry(
            com=pts.mean(axis=0),
            start_pos=pts[0],
            end_pos=pts[-1],
            mid_pos=pts[len(cell) // 2],
            eigenvalues=vals,
            eigenvectors=disambiguate_signs(vecs, anchor),
        ))
    return out


# ---------------------------------------------------------------------------
# Per-rank bundles
# ---------------------------------------------------------------------------

def centered_coords(cc: ProteinCC):
    ca = np.asarray(cc.coords, dtype=float)
    return ca - ca.mean(axis=0)


def node_features(cc: ProteinCC, s: ProteinStructure, three_di: Optional[AnnotationTrack] = None,
                  use_sequence: bool = True) -> FeatureBundle:
    n = len(s)
    aa = one_hot(s.aa_index, NUM_AA_CLASSES)
    if not use_sequence:
        aa[:] = 0.0
    if three_di is not None:
        tdi = one_hot(three_di.indices(), len(THREE_DI_ALPHABET))
    else:
        tdi = np.zeros((n, len(THREE_DI_ALPHABET)))
    pe = positional_encoding(s.seq_index, PE_NODE)
    va, vmask = virtual_angles(s.ca, s.chain_ids)
    bd, bmask = backbone_dihedrals(s)
    scalars = np.concatenate([aa, tdi, pe, sincos(va, vmask), sincos(bd, bmask)], axis=1)

    ca = s.ca
    prev_ca = _shift(ca, -1, s.chain_ids)
    next_ca = _shift(ca, 1, s.chain_ids)
    to_prev = np.nan_to_num(unit(prev_ca - ca))
    to_next = np.nan_to_num(unit(next_ca - ca))
    vectors = np.stack([to_prev, to_next, sidechain_directions(s)], axis=1)
    return FeatureBundle(0, scalars, vectors)


def edge_features(cc: ProteinCC, s: Optional[ProteinStructure] = None) -> FeatureBundle:
    x = centered_coords(cc)
    d = x[cc.edges[:, 1]] - x[cc.edges[:, 0]]
    dist = np.linalg.norm(d, axis=1)
    scalars = np.concatenate([dist[:, None], positional_encoding(dist, PE_EDGE)], axis=1)
    vectors = unit(d)[:, None, :]
    return FeatureBundle(1, scalars, vectors)


def _angle_sincos(u, v):
    return np.array([np.linalg.norm(np.cross(u, v)), float(u @ v)])


def sse_features(cc: ProteinCC, s: ProteinStructure, geoms=None) -> FeatureBundle:
    x = centered_coords(cc)
    if geoms is None:
        geoms = sse_geometry(cc, x)
    c = cc.num_sse
    scalars = np.zeros((c, SCALAR_WIDTHS[2]))
    vectors = np.zeros((c, VECTOR_WIDTHS[2], 3))
    seq = s.seq_index
    for k, (cell, g) in enumerate(zip(cc.sse_cells, geoms)):
        prev = geoms[k - 1] if k > 0 else None
        nxt = geoms[k + 1] if k + 1 < c else None
        type_oh = np.zeros(3)
        type_oh[SSE3_ALPHABET.index(cc.sse_labels[k])] = 1.0
        consec = np.zeros(4)
        if prev is not None:
            consec[0:2] = _angle_sincos(g.eigenvectors[0], prev.eigenvectors[0])
        if nxt is not None:
            consec[2:4] = _angle_sincos(g.eigenvectors[0], nxt.eigenvectors[0])
        torsion = np.zeros(2)
        if prev is not None and nxt is not None:
            t = dihedral(prev.com, g.start_pos, g.end_pos, nxt.com)
            torsion[:] = np.sin(t), np.cos(t)
        scalars[k] = np.concatenate([
            type_oh, [len(cell)],
            positional_encoding(seq[cell[0]], PE_SSE), positional_encoding(seq[cell[-1]], PE_SSE),
            consec, torsion, g.eigenvalues, _safe_shape(g.eigenvalues, 5),
        ])
        pts = [g.start_pos, g.mid_pos, g.end_pos, g.com]
        pairs = [unit(pts[b] - pts[a]) for a in range(4) for b in range(a + 1, 4)]
        adj = [unit(prev.com - g.com) if prev is not None else np.zeros(3),
               unit(nxt.com - g.com) if nxt is not None else np.zeros(3)]
        # protein COM is the origin of the centred frame
        to_center = [unit(-g.start_pos), unit(-g.com), unit(-g.end_pos)]
        vectors[k] = np.stack(pairs + list(g.eigenvectors) + adj + to_center)
    return FeatureBundle(2, scalars, vectors)


def contact_statistics(ca, cutoff=CONTACT_CUTOFF, min_sep=CONTACT_MIN_SEPARATION):
    """(density, order): contact pairs / C(N, 2) and mean |i - j| / N over contacts."""
    ca = np.asarray(ca, dtype=float)
    n = ca.shape[0]
    if n < 2:
        return 0.0, 0.0
    i, j = np.triu_indices(n, k=min_sep)
    d = np.linalg.norm(ca[i] - ca[j], axis=1)
    hit = d < cutoff
    density = hit.sum() / (n * (n - 1) / 2)
    order = float(np.mean(j[hit] - i[hit]) / n) if hit.any() else 0.0
    return float(density), order


def protein_features(cc: ProteinCC, s: ProteinStructure, use_sequence: bool = True) -> FeatureBundle:
    x = centered_coords(cc)
    n = x.shape[0]
    if use_sequence:
        aa_freq = np.bincount(s.aa_index, minlength=NUM_AA_CLASSES) / n
    else:
        aa_freq = np.zeros(NUM_AA_CLASSES)
    sizes = {t: [len(c) for c, lab in zip(cc.sse_cells, cc.sse_labels) if lab == t]
             for t in SSE3_ALPHABET}
    counts = np.array([len(sizes[t]) for t in SSE3_ALPHABET], dtype=float)
    sse_freq = counts / counts.sum() if counts.sum() else np.zeros(3)
    size_mean = np.array([np.mean(sizes[t]) if sizes[t] else 0.0 for t in SSE3_ALPHABET])
    size_std = np.array([np.std(sizes[t]) if sizes[t] else 0.0 for t in SSE3_ALPHABET])
    vals, _ = sorted_eigh(covariance(x))
    rg = np.sqrt(np.mean(np.sum(x ** 2, axis=1)))
    density, order = contact_statistics(x)
    scalars = np.concatenate([
        [n], aa_freq, sse_freq, size_mean, size_std, vals, _safe_shape(vals, 8),
        [rg, density, order],
    ])[None, :]

    frame = robust_protein_frame(x)
    r2 = np.einsum("ij,ij->i", x, x)
    far = np.lexsort((np.arange(n), -r2))[:N_EXTREME]
    near = np.lexsort((np.arange(n), r2))[:N_EXTREME]
    far_vecs = np.zeros((N_EXTREME, 3))
    near_vecs = np.zeros((N_EXTREME, 3))
    far_vecs[:len(far)] = unit(x[far])
    near_vecs[:len(near)] = unit(x[near])
    vectors = np.concatenate([frame, far_vecs, near_vecs])[None, :, :]
    return FeatureBundle(3, scalars, vectors)


def featurize(cc: ProteinCC, s: ProteinStructure, three_di: Optional[AnnotationTrack] = None,
              use_sequence: bool = True) -> tuple:
    """All four bundles, indexed by rank."""
    return (
        node_features(cc, s, three_di, use_sequence),
        edge_features(cc, s),
        sse_features(cc, s),
        protein_features(cc, s, use_sequence),
    )
