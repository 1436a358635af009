"""Synthetic backbone generators used by tests, checks, benchmarks and demos.

Chains are grown atom by atom from internal coordinates (bond lengths,
bond angles, torsions), so the dihedral angles of a generated chain are
known exactly.
"""

import numpy as np

from .geometry import place_atom, unit
from .structure_io import AA_ALPHABET, ONE_TO_THREE, ProteinStructure

# Engh & Huber style ideal backbone geometry (Angstrom, degrees).
N_CA = 1.458
CA_C = 1.525
C_N = 1.329
C_O = 1.231
ANG_N_CA_C = 111.2
ANG_CA_C_N = 116.2
ANG_C_N_CA = 121.7
ANG_CA_C_O = 120.5

HELIX_PHI_PSI = (-57.0, -47.0)
STRAND_PHI_PSI = (-139.0, 135.0)


def build_backbone(phi, psi, omega=None):
    """Grow an (N, 4, 3) N/CA/C/O array from per-residue torsions in degrees.

    ``phi[0]`` is unused (no preceding C) and ``psi[-1]`` only orients the
    terminal carbonyl oxygen.
    """
    phi = np.radians(np.asarray(phi, dtype=float))
    psi = np.radians(np.asarray(psi, dtype=float))
    n = len(phi)
    omega = np.radians(np.full(n, 180.0) if omega is None else np.asarray(omega, dtype=float))
    out = np.zeros((n, 4, 3))
    a_ncac = np.radians(ANG_N_CA_C)
    a_cacn = np.radians(ANG_CA_C_N)
    a_cnca = np.radians(ANG_C_N_CA)
    a_caco = np.radians(ANG_CA_C_O)
    N = np.array([0.0, 0.0, 0.0])
    CA = np.array([N_CA, 0.0, 0.0])
    C = CA + CA_C * np.array([-np.cos(a_ncac), np.sin(a_ncac), 0.0])
    out[0, :3] = N, CA, C
    for i in range(1, n):
        pN, pCA, pC = out[i - 1, 0], out[i - 1, 1], out[i - 1, 2]
        N = place_atom(pN, pCA, pC, C_N, a_cacn, psi[i - 1])
        CA = place_atom(pCA, pC, N, N_CA, a_cnca, omega[i - 1])
        C = place_atom(pC, N, CA, CA_C, a_ncac, phi[i])
        out[i, :3] = N, CA, C
    for i in range(n):
        out[i, 3] = place_atom(out[i, 0], out[i, 1], out[i, 2], C_O, a_caco, psi[i] + np.pi)
    return out


def _structure(coords, sequence=None, source_id="synthetic", chain_ids=None):
    n = coords.shape[0]
    if sequence is None:
        resnames = ["GLY"] * n
    else:
        resnames = [ONE_TO_THREE.get(a, "UNK") for a in sequence]
    return ProteinStructure.from_backbone(coords, chain_ids=chain_ids, resnames=resnames,
                                          source_id=source_id)


def from_torsions(phi, psi, sequence=None, source_id="synthetic"):
    """Single-chain structure from per-residue backbone torsions in degrees."""
    return _structure(build_backbone(np.asarray(phi, float), np.asarray(psi, float)), sequence,
                      source_id=source_id)


def ideal_helix(n=20, phi=HELIX_PHI_PSI[0], psi=HELIX_PHI_PSI[1], sequence=None):
    coords = build_backbone(np.full(n, phi), np.full(n, psi))
    return _structure(coords, sequence, source_id=f"ideal_helix_{n}")


def glycine_chain(n=5):
    return _structure(build_backbone(np.full(n, -70.0), np.full(n, 140.0)),
                      source_id=f"gly_{n}")


def _hairpin_layout(strand, gap, shift):
    """Second strand as a 180-degree copy of the first about the sheet normal."""
    ca = strand[:, 1]
    center = ca.mean(axis=0)
    axis = unit(ca[-1] - ca[0])
    co = strand[:, 3] - strand[:, 2]
    co_perp = co - (co @ axis)[:, None] * axis
    # carbonyls alternate sides; pick the side of the last residue so the turn is there
    side = unit(co_perp[-1])
    normal = unit(np.cross(axis, side))
    pivot = center + 0.5 * gap * side + shift * axis
    rel = strand - pivot
    # 180-degree rotation about `normal`: v -> 2 (v.n) n - v
    rotated = 2.0 * (rel @ normal)[..., None] * normal - rel + pivot
    return rotated


def beta_hairpin(strand_len=7, gap=4.8, sequence=None):
    """Two antiparallel strands joined by a two-residue turn, one chain.

    The register shift of the second strand is chosen from a small grid so
    that backbone H-bond geometry (O...N near 2.9 A) pairs the strands.
    """
    strand = build_backbone(np.full(strand_len, STRAND_PHI_PSI[0]),
                            np.full(strand_len, STRAND_PHI_PSI[1]))
    best = None
    for shift in np.linspace(-2.0, 2.0, 81):
        other = _hairpin_layout(strand, gap, shift)
        d = np.linalg.norm(strand[:, None, 3] - other[None, :, 0], axis=-1)
        score = np.sum(np.abs(d - 2.9) < 0.35)
        close = np.min(np.linalg.norm(strand[:, None, 1] - other[None, :, 1], axis=-1))
        if close < 3.8:
            continue
        if best is None or score > best[0]:
            best = (score, shift, other)
    other = best[2]
    # two turn residues: interpolated between the strand ends, pushed 3 A past them
    end_a, start_b = strand[-1], other[0]
    push = 3.0 * unit(end_a[1] - strand[0, 1])
    turn = [(1 - t) * end_a + t * start_b + push for t in (1.0 / 3.0, 2.0 / 3.0)]
    coords = np.concatenate([strand, np.array(turn), other], axis=0)
    return _structure(coords, sequence, source_id="beta_hairpin")


def two_fragment_chain(gap=50.0):
    """Two 3-residue pieces 50 A apart labelled as one chain (one chain break)."""
    frag = build_backbone(np.full(3, -70.0), np.full(3, 140.0))
    far = frag + np.array([gap, 0.0, 0.0]) + (frag[-1, 1] - frag[0, 1])
    return _structure(np.concatenate([frag, far], axis=0), source_id="two_fragments")


_SEGMENT_ANGLES = {
    "H": (HELIX_PHI_PSI, 4.0),
    "E": (STRAND_PHI_PSI, 6.0),
    "C": ((-80.0, 150.0), 35.0),
}


def random_protein(n, rng, with_sequence=True):
    """Chain of random helix/strand/coil segments with jittered torsions.

    The result is self-avoiding only statistically; it exists to exercise
    the pipeline on generic, non-symmetric geometry.
    """
    phi = np.empty(n)
    psi = np.empty(n)
    i = 0
    while i < n:
        kind = rng.choice(["H", "E", "C"], p=[0.45, 0.25, 0.30])
        length = int(rng.integers(4, 13)) if kind != "C" else int(rng.integers(2, 6))
        (p0, s0), jitter = _SEGMENT_ANGLES[kind]
        j = min(n, i + length)
        phi[i:j] = p0 + jitter * rng.standard_normal(j - i)
        psi[i:j] = s0 + jitter * rng.standard_normal(j - i)
        i = j
    coords = build_backbone(phi, psi, 180.0 + 3.0 * rng.standard_normal(n))
    seq = "".join(rng.choice(list(AA_ALPHABET), size=n)) if with_sequence else None
    return _structure(coords, seq, source_id=f"random_{n}")


def chiral_fixture():
    """A right-handed helix capped by a strand: chiral with no mirror symmetry."""
    phi = np.concatenate([np.full(14, HELIX_PHI_PSI[0]), np.full(4, -80.0),
                          np.full(8, STRAND_PHI_PSI[0])])
    psi = np.concatenate([np.full(14, HELIX_PHI_PSI[1]), np.full(4, 150.0),
                          np.full(8, STRAND_PHI_PSI[1])])
    seq = ("MKTAYIAKQRQISF" "VKSH" "FSRQLEER")
    return _structure(build_backbone(phi, psi), seq, source_id="chiral")


def mirrored(s):
    """Reflect every atom through the xy-plane (z -> -z)."""
    return s.transformed(np.diag([1.0, 1.0, -1.0]))


def random_complex(rng, max_nodes=20, max_sse=5, knn=None):
    """Small random complex for algebra tests.

    Nodes get random coordinates; edges are either a kNN graph or a random
    set of directed pairs; 2-cells are random disjoint consecutive runs of
    at least 3 nodes.
    """
    from .complex import ProteinCC, build_knn_edges

    n = int(rng.integers(2, max_nodes + 1))
    coords = rng.normal(scale=5.0, size=(n, 3))
    if knn is None and rng.random() < 0.5:
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        keep = rng.random(len(pairs)) < rng.uniform(0.1, 0.6)
        edges = np.array([p for p, k in zip(pairs, keep) if k], dtype=np.int64).reshape(-1, 2)
    else:
        edges = build_knn_edges(coords, knn or int(rng.integers(1, 7)))
    cells, labels = [], []
    start = 0
    while len(cells) < max_sse and start + 3 <= n:
        start += int(rng.integers(0, 3))
        size = int(rng.integers(3, 7))
        if start + size > n:
            break
        cells.append(np.arange(start, start + size))
        labels.append(str(rng.choice(["H", "E", "C"])))
        start += size
    return ProteinCC(n, edges, tuple(cells), tuple(labels), coords)
