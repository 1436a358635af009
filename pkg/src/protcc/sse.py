"""Three-state secondary structure from backbone hydrogen bonds.

Electrostatic H-bond model and pattern rules follow Kabsch & Sander (1983):
n-turns and minimal helices from (i, i+n) bonds, bridges and ladders for
strands, then an 8-to-3 state reduction {H,G,I}->H, {E,B}->E, rest->C.
"""

import numpy as np

from .errors import MissingAtom
from .structure_io import AnnotationTrack, ProteinStructure, TrackKind

# Kabsch-Sander constants: q1*q2*f = 0.084 * 0.42 * 332 in the original
# notation reduces to 0.084 * 332 with the partial charges folded in.
COUPLING = 0.084 * 332.0
HBOND_CUTOFF = -0.5
MIN_ENERGY = -9.9
MIN_DISTANCE = 0.5
NH_LENGTH = 1.01
MAX_CA_DISTANCE = 9.0
PEPTIDE_BREAK = 2.5


def infer_amide_hydrogens(s: ProteinStructure):
    """Amide H positions, NaN where no predecessor carbonyl is available.

    H_i = N_i + 1.01 * unit(C_{i-1} - O_{i-1}).
    """
    bb = s.backbone
    h = np.full((len(s), 3), np.nan)
    if len(s) < 2:
        return h
    co = bb[:-1, 2] - bb[:-1, 3]
    norm = np.linalg.norm(co, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        h[1:] = bb[1:, 0] + NH_LENGTH * co / norm
    h[1:][~s.same_chain_next] = np.nan
    return h


def _pair_energy(c, o, n, h):
    r_on = np.linalg.norm(o - n, axis=-1)
    r_ch = np.linalg.norm(c - h, axis=-1)
    r_oh = np.linalg.norm(o - h, axis=-1)
    r_cn = np.linalg.norm(c - n, axis=-1)
    close = np.minimum.reduce([r_on, r_ch, r_oh, r_cn]) < MIN_DISTANCE
    with np.errstate(divide="ignore", invalid="ignore"):
        e = COUPLING * (1.0 / r_on + 1.0 / r_ch - 1.0 / r_oh - 1.0 / r_cn)
    e = np.where(close, MIN_ENERGY, e)
    return np.maximum(e, MIN_ENERGY)


def hbond_energy(s: ProteinStructure, donor: int, acceptor: int, hydrogens=None) -> float:
    """Energy (kcal/mol) of the N-H(donor) ... O=C(acceptor) bond."""
    if hydrogens is None:
        hydrogens = infer_amide_hydrogens(s)
    bb = s.backbone
    n, h = bb[donor, 0], hydrogens[donor]
    c, o = bb[acceptor, 2], bb[acceptor, 3]
    for name, xyz in (("N", n), ("H", h), ("C", c), ("O", o)):
        if np.isnan(xyz).any():
            raise MissingAtom(f"{name} missing for hbond donor {donor} / acceptor {acceptor}")
    return float(_pair_energy(c, o, n, h))


def energy_matrix(s: ProteinStructure, hydrogens=None) -> np.ndarray:
    """E[i, j] = energy of CO(i) ... HN(j); +inf where no bond is considered.

    Pairs are evaluated when CA-CA < 9 A, the donor has an H and is not
    proline, and the two residues are not sequence neighbours in one chain.
    """
    if hydrogens is None:
        hydrogens = infer_amide_hydrogens(s)
    bb = s.backbone
    n_res = len(s)
    out = np.full((n_res, n_res), np.inf)
    ca = bb[:, 1]
    d2 = np.sum((ca[:, None, :] - ca[None, :, :]) ** 2, axis=-1)
    ok = d2 < MAX_CA_DISTANCE ** 2
    donor_ok = ~np.isnan(hydrogens).any(axis=1) & ~np.isnan(bb[:, 0]).any(axis=1)
    donor_ok &= np.array([r.resname != "PRO" for r in s.residues])
    acc_ok = ~np.isnan(bb[:, 2]).any(axis=1) & ~np.isnan(bb[:, 3]).any(axis=1)
    ok &= acc_ok[:, None] & donor_ok[None, :]
    chain = s.chain_ids
    idx = np.arange(n_res)
    near = (np.abs(idx[:, None] - idx[None, :]) < 2) & (chain[:, None] == chain[None, :])
    ok &= ~near
    i, j = np.nonzero(ok)
    if len(i):
        out[i, j] = _pair_energy(bb[i, 2], bb[i, 3], bb[j, 0], hydrogens[j])
    return out


def hbond_matrix(energies: np.ndarray) -> np.ndarray:
    """Boolean HB[i, j]: CO(i) bonded to NH(j), keeping each donor's two best acceptors."""
    n = energies.shape[0]
    hb = np.zeros((n, n), dtype=bool)
    if n == 0:
        return hb
    k = min(2, n)
    # stable sort per donor column: ties resolved toward the lower acceptor index
    best = np.argsort(energies, axis=0, kind="stable")[:k]
    cols = np.broadcast_to(np.arange(n), best.shape)
    keep = energies[best, cols] < HBOND_CUTOFF
    hb[best[keep], cols[keep]] = True
    return hb


def _breaks(s: ProteinStructure) -> np.ndarray:
    """brk[i] True when residues i and i+1 are not peptide-bonded."""
    bb = s.backbone
    d = np.linalg.norm(bb[1:, 0] - bb[:-1, 2], axis=1)
    return ~s.same_chain_next | ~(d < PEPTIDE_BREAK)


def _no_break(brk_cum, a, b):
    """True where no break lies between residues a..b (a <= b, arrays ok)."""
    return brk_cum[b] - brk_cum[a] == 0


def assign_sse8(s: ProteinStructure) -> np.ndarray:
    """DSSP-style eight-state codes as an array of single characters."""
    n = len(s)
    ss = np.full(n, " ", dtype="<U1")
    if n < 5:
        return ss
    hb = hbond_matrix(energy_matrix(s))
    brk = _breaks(s)
    # brk_cum[k] = number of breaks among pairs (0,1)..(k-1,k)
    brk_cum = np.concatenate([[0], np.cumsum(brk)])

    # --- helices -----------------------------------------------------------
    helix = {}
    for turn in (3, 4, 5):
        t = np.zeros(n, dtype=bool)
        i = np.arange(n - turn)
        t[i] = hb[i, i + turn] & _no_break(brk_cum, i, i + turn)
        start = np.zeros(n, dtype=bool)
        start[1:] = t[1:] & t[:-1]
        flag = np.zeros(n, dtype=bool)
        for k in np.nonzero(start)[0]:
            flag[k:k + turn] = True
        helix[turn] = flag

    # --- bridges -----------------------------------------------------------
    pad = np.zeros((n + 2, n + 2), dtype=bool)
    pad[1:-1, 1:-1] = hb

    def H(a, b):
        # H(a, b)[i, j] = hb[i + a, j + b]
        return pad[1 + a:n + 1 + a, 1 + b:n + 1 + b]

    def HT(a, b):
        # HT(a, b)[i, j] = hb[j + a, i + b]
        return pad.T[1 + b:n + 1 + b, 1 + a:n + 1 + a]

    parallel = (H(-1, 0) & HT(0, 1)) | (HT(-1, 0) & H(0, 1))
    anti = (H(0, 0) & HT(0, 0)) | (H(-1, 1) & HT(-1, 1))
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    valid = (jj >= ii + 3) & (ii >= 1) & (jj >= 1) & (ii <= n - 2) & (jj <= n - 2)
    ic = np.clip(ii, 1, n - 2)
    jc = np.clip(jj, 1, n - 2)
    valid &= _no_break(brk_cum, ic - 1, ic + 1) & _no_break(brk_cum, jc - 1, jc + 1)
    bridges = []
    for kind, mat in (("P", parallel & valid), ("A", anti & valid)):
        for i, j in zip(*np.nonzero(mat)):
            bridges.append((int(i), int(j), kind))
    bridges.sort()

    # --- ladders -------------------------------------------------------------
    ladders = []  # each: dict(kind, pairs=[(i, j), ...])
    for i, j, kind in bridges:
        for lad in ladders:
            li, lj = lad["pairs"][-1]
            step = 1 if kind == "P" else -1
            if (lad["kind"] == kind and i == li + 1 and j == lj + step
                    and _no_break(brk_cum, li, i) and _no_break(brk_cum, min(j, lj), max(j, lj))):
                lad["pairs"].append((i, j))
                break
        else:
            ladders.append({"kind": kind, "pairs": [(i, j)], "linked": False})

    strand = np.zeros(n, dtype=bool)
    bridge_only = np.zeros(n, dtype=bool)
    for a, l1 in enumerate(ladders):
        for l2 in ladders[a + 1:]:
            if l1["kind"] != l2["kind"]:
                continue
            i1e, j1e = l1["pairs"][-1]
            i2s, j2s = l2["pairs"][0]
            gi = i2s - i1e
            gj = (j2s - j1e) if l1["kind"] == "P" else (j1e - j2s)
            if gi < 1 or gj < 1:
                continue
            if ((gi < 6 and gj < 3) or (gi < 3 and gj < 6)) and _no_break(brk_cum, i1e, i2s):
                l1["linked"] = l2["linked"] = True
                i_lo, i_hi = l1["pairs"][0][0], l2["pairs"][-1][0]
                js = [p[1] for p in l1["pairs"] + l2["pairs"]]
                strand[i_lo:i_hi + 1] = True
                strand[min(js):max(js) + 1] = True
    for lad in ladders:
        residues = [p[0] for p in lad["pairs"]] + [p[1] for p in lad["pairs"]]
        if len(lad["pairs"]) > 1 or lad["linked"]:
            strand[residues] = True
        else:
            bridge_only[residues] = True

    # --- priority: H > E > B > G > I ---------------------------------------
    ss[helix[5]] = "I"
    ss[helix[3]] = "G"
    ss[bridge_only] = "B"
    ss[strand] = "E"
    ss[helix[4]] = "H"
    return ss


_REDUCE = {"H": "H", "G": "H", "I": "H", "E": "E", "B": "E"}


def assign_sse(s: ProteinStructure) -> AnnotationTrack:
    """Three-state (H/E/C) labels for every residue."""
    codes = assign_sse8(s)
    return AnnotationTrack(TrackKind.SSE3, tuple(_REDUCE.get(c, "C") for c in codes))
