"""Legacy PDB parsing, backbone validation and per-residue annotation tracks.

Only the backbone atoms N, CA, C and O are retained. Residues without a CA
atom are dropped at parse time, so every residue that reaches downstream
stages has a CA coordinate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Union

import numpy as np

from .errors import LengthMismatch, MalformedRecord, NoBackbone, UnknownSymbol

BACKBONE_ATOMS = ("N", "CA", "C", "O")

# 20 standard residues in one-letter alphabetical order, then three extra classes.
AA_ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
AA_UNKNOWN = 20
AA_AMBIGUOUS = 21
AA_GAP = 22
NUM_AA_CLASSES = 23

THREE_TO_ONE = {
    "ALA": "A", "CYS": "C", "ASP": "D", "GLU": "E", "PHE": "F",
    "GLY": "G", "HIS": "H", "ILE": "I", "LYS": "K", "LEU": "L",
    "MET": "M", "ASN": "N", "PRO": "P", "GLN": "Q", "ARG": "R",
    "SER": "S", "THR": "T", "VAL": "V", "TRP": "W", "TYR": "Y",
}
ONE_TO_THREE = {v: k for k, v in THREE_TO_ONE.items()}
_AMBIGUOUS_NAMES = {"ASX", "GLX", "XLE"}
_AMBIGUOUS_LETTERS = {"B", "Z", "J"}
_GAP_NAMES = {"---", "GAP"}

SSE3_ALPHABET = ("H", "E", "C")
# 20 structural letters plus X for undetermined states.
THREE_DI_ALPHABET = tuple("ACDEFGHIKLMNPQRSTVWY") + ("X",)


def aa_class(resname: str) -> int:
    """Map a residue name (three- or one-letter) to one of the 23 classes."""
    name = resname.strip().upper()
    if len(name) == 1:
        if name in AA_ALPHABET:
            return AA_ALPHABET.index(name)
        if name in _AMBIGUOUS_LETTERS:
            return AA_AMBIGUOUS
        if name == "-":
            return AA_GAP
        return AA_UNKNOWN
    if name in THREE_TO_ONE:
        return AA_ALPHABET.index(THREE_TO_ONE[name])
    if name in _AMBIGUOUS_NAMES:
        return AA_AMBIGUOUS
    if name in _GAP_NAMES:
        return AA_GAP
    return AA_UNKNOWN


@dataclass(frozen=True, eq=False)
class Residue:
    chain_id: str
    seq_index: int
    resname: str
    n_coord: Optional[np.ndarray] = None
    ca_coord: Optional[np.ndarray] = None
    c_coord: Optional[np.ndarray] = None
    o_coord: Optional[np.ndarray] = None
    resseq: Optional[int] = None
    icode: str = ""

    @property
    def aa_code(self) -> int:
        return aa_class(self.resname)

    def atom(self, name: str) -> Optional[np.ndarray]:
        return getattr(self, _ATTR[name])


_ATTR = {"N": "n_coord", "CA": "ca_coord", "C": "c_coord", "O": "o_coord"}


@dataclass(frozen=True, eq=False)
class ProteinStructure:
    """Ordered backbone model: chain order first, then sequence order."""

    residues: tuple
    source_id: str = ""

    def __post_init__(self):
        if len(self.residues) == 0:
            raise NoBackbone("structure has no residues")
        object.__setattr__(self, "residues", tuple(self.residues))

    def __len__(self):
        return len(self.residues)

    @cached_property
    def backbone(self) -> np.ndarray:
        """(N, 4, 3) array of N/CA/C/O coordinates; NaN marks a missing atom."""
        out = np.full((len(self.residues), 4, 3), np.nan)
        for i, res in enumerate(self.residues):
            for k, name in enumerate(BACKBONE_ATOMS):
                xyz = res.atom(name)
                if xyz is not None:
                    out[i, k] = xyz
        out.setflags(write=False)
        return out

    @property
    def ca(self) -> np.ndarray:
        return self.backbone[:, 1]

    @cached_property
    def chain_ids(self) -> np.ndarray:
        return np.array([r.chain_id for r in self.residues])

    @cached_property
    def seq_index(self) -> np.ndarray:
        return np.array([r.seq_index for r in self.residues], dtype=np.int64)

    @cached_property
    def aa_index(self) -> np.ndarray:
        return np.array([r.aa_code for r in self.residues], dtype=np.int64)

    @cached_property
    def same_chain_next(self) -> np.ndarray:
        """Boolean (N-1,) mask: residue i and i+1 belong to the same chain."""
        ids = self.chain_ids
        return ids[1:] == ids[:-1]

    @classmethod
    def from_backbone(cls, coords, chain_ids=None, resnames=None, source_id=""):
        """Build a structure from an (N, 4, 3) N/CA/C/O array (NaN = missing atom)."""
        coords = np.asarray(coords, dtype=float)
        n = coords.shape[0]
        if chain_ids is None:
            chain_ids = ["A"] * n
        if resnames is None:
            resnames = ["GLY"] * n
        residues = []
        counters = {}
        for i in range(n):
            ch = chain_ids[i]
            idx = counters.get(ch, 0)
            counters[ch] = idx + 1
            atoms = [None if np.isnan(coords[i, k]).any() else coords[i, k].copy()
                     for k in range(4)]
            residues.append(Residue(ch, idx, resnames[i], *atoms, resseq=idx + 1))
        return cls(tuple(residues), source_id)

    def transformed(self, rotation=None, translation=None) -> "ProteinStructure":
        """Copy with x -> R x + t applied to every atom."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.zeros(3) if translation is None else np.asarray(translation, dtype=float)
        coords = self.backbone @ R.T + t
        return ProteinStructure.from_backbone(
            coords, list(self.chain_ids), [r.resname for r in self.residues],
            self.source_id)


# ---------------------------------------------------------------------------
# PDB parsing
# ---------------------------------------------------------------------------

def _float_field(line, lo, hi, lineno, what):
    raw = line[lo:hi]
    try:
        return float(raw)
    except ValueError:
        raise MalformedRecord(lineno, f"cannot parse {what} from {raw!r}") from None


def parse_pdb(text: str, source_id: str = "") -> ProteinStructure:
    """Parse legacy fixed-column PDB text into a backbone-only structure.

    Only ATOM records of the first model are read. Alternate locations are
    resolved by keeping the conformer with the highest occupancy (first seen
    on ties). Residues lacking a CA atom are dropped.

    Raises
    ------
    MalformedRecord
        An ATOM record whose coordinate or residue-number columns do not parse.
    NoBackbone
        No residue carries a CA atom.
    """
    # (chain, resseq, icode) -> {"resname":..., "atoms": {name: (occ, xyz)}}
    residues: dict = {}
    chain_order: list = []
    per_chain: dict = {}
    seen_model = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        record = line[:6]
        if record.startswith("MODEL"):
            if seen_model:
                break
            seen_model = True
            continue
        if record.startswith("ENDMDL"):
            break
        if record != "ATOM  ":
            continue
        if len(line) < 54:
            raise MalformedRecord(lineno, "ATOM record shorter than 54 columns")
        name = line[12:16].strip()
        if name not in _ATTR:
            continue
        altloc = line[16].strip()
        resname = line[17:20].strip()
        chain = line[21].strip() or "A"
        try:
            resseq = int(line[22:26])
        except ValueError:
            raise MalformedRecord(lineno, f"cannot parse residue number {line[22:26]!r}") from None
        icode = line[26].strip() if len(line) > 26 else ""
        xyz = np.array([
            _float_field(line, 30, 38, lineno, "x"),
            _float_field(line, 38, 46, lineno, "y"),
            _float_field(line, 46, 54, lineno, "z"),
        ])
        occ_raw = line[54:60].strip()
        if occ_raw:
            occ = _float_field(line, 54, 60, lineno, "occupancy")
        else:
            occ = 1.0
        key = (chain, resseq, icode)
        entry = residues.get(key)
        if entry is None:
            entry = {"resname": resname, "atoms": {}}
            residues[key] = entry
            if chain not in per_chain:
                per_chain[chain] = []
                chain_order.append(chain)
            per_chain[chain].append(key)
        prev = entry["atoms"].get(name)
        if prev is None or (altloc and occ > prev[0]):
            entry["atoms"][name] = (occ, xyz)

    out = []
    for chain in chain_order:
        idx = 0
        for key in per_chain[chain]:
            atoms = residues[key]["atoms"]
            if "CA" not in atoms:
                continue
            coords = {a: atoms[a][1] if a in atoms else None for a in BACKBONE_ATOMS}
            out.append(Residue(chain, idx, residues[key]["resname"],
                               coords["N"], coords["CA"], coords["C"], coords["O"],
                               resseq=key[1], icode=key[2]))
            idx += 1
    if not out:
        raise NoBackbone("no residue with a CA atom found")
    return ProteinStructure(tuple(out), source_id)


def emit_pdb(structure: ProteinStructure) -> str:
    """Write backbone atoms as legacy PDB ATOM records (3-decimal coordinates)."""
    lines = []
    serial = 1
    for res in structure.residues:
        resseq = res.resseq if res.resseq is not None else res.seq_index + 1
        for name in BACKBONE_ATOMS:
            xyz = res.atom(name)
            if xyz is None:
                continue
            atom_field = f" {name:<3s}" if len(name) < 4 else name
            lines.append(
                f"ATOM  {serial:5d} {atom_field:4s} {res.resname:>3s} {res.chain_id:1s}"
                f"{resseq:4d}{res.icode or ' ':1s}   "
                f"{xyz[0]:8.3f}{xyz[1]:8.3f}{xyz[2]:8.3f}{1.0:6.2f}{0.0:6.2f}"
                f"          {name[0]:>2s}"
            )
            serial += 1
    lines.append("END")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

CHAIN_BREAK_CA_DISTANCE = 4.5


@dataclass(frozen=True)
class ValidationReport:
    n_residues: int
    n_chains: int
    missing_n: tuple = ()
    missing_c: tuple = ()
    missing_o: tuple = ()
    chain_breaks: tuple = ()  # (i, i+1, CA-CA distance)

    @property
    def ok(self) -> bool:
        return not (self.missing_n or self.missing_c or self.missing_o or self.chain_breaks)


def validate_backbone(s: ProteinStructure) -> ValidationReport:
    bb = s.backbone
    missing = np.isnan(bb).any(axis=2)
    ca = bb[:, 1]
    d = np.linalg.norm(ca[1:] - ca[:-1], axis=1)
    breaks = np.nonzero(s.same_chain_next & (d > CHAIN_BREAK_CA_DISTANCE))[0]
    return ValidationReport(
        n_residues=len(s),
        n_chains=len(set(s.chain_ids.tolist())),
        missing_n=tuple(np.nonzero(missing[:, 0])[0].tolist()),
        missing_c=tuple(np.nonzero(missing[:, 2])[0].tolist()),
        missing_o=tuple(np.nonzero(missing[:, 3])[0].tolist()),
        chain_breaks=tuple((int(i), int(i) + 1, float(d[i])) for i in breaks),
    )


# ---------------------------------------------------------------------------
# Annotation tracks
# ---------------------------------------------------------------------------

class TrackKind(enum.Enum):
    SSE3 = "SSE3"
    THREE_DI = "THREE_DI"

    @property
    def alphabet(self) -> tuple:
        return SSE3_ALPHABET if self is TrackKind.SSE3 else THREE_DI_ALPHABET


@dataclass(frozen=True)
class AnnotationTrack:
    kind: TrackKind
    labels: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.labels)

    def indices(self) -> np.ndarray:
        alphabet = self.kind.alphabet
        return np.array([alphabet.index(x) for x in self.labels], dtype=np.int64)


def make_track(labels: Iterable[str], kind: Union[TrackKind, str]) -> AnnotationTrack:
    kind = TrackKind(kind) if not isinstance(kind, TrackKind) else kind
    labels = tuple(labels)
    alphabet = kind.alphabet
    for pos, tok in enumerate(labels):
        if tok not in alphabet:
            raise UnknownSymbol(f"token {tok!r} at position {pos} is not in the {kind.value} alphabet")
    return AnnotationTrack(kind, labels)


def load_annotations(text: str, kind: Union[TrackKind, str],
                     expected: Union[int, ProteinStructure, None] = None) -> AnnotationTrack:
    """Read one label token per line, or a single line of one-letter labels.

    ``expected`` is either a residue count or the structure being annotated.
    Blank trailing lines are ignored.
    """
    tokens = [ln.strip() for ln in text.splitlines()]
    while tokens and not tokens[-1]:
        tokens.pop()
    if len(tokens) == 1 and len(tokens[0]) > 1:
        tokens = list(tokens[0])
    track = make_track(tokens, kind)
    if expected is not None:
        n = len(expected) if isinstance(expected, ProteinStructure) else int(expected)
        if len(track) != n:
            raise LengthMismatch(f"{len(track)} labels for {n} residues")
    return track


def sequence_string(s: ProteinStructure) -> str:
    letters = AA_ALPHABET + "XB-"
    return "".join(letters[i] for i in s.aa_index)


__all__ = [
    "AA_ALPHABET", "AnnotationTrack", "BACKBONE_ATOMS", "NUM_AA_CLASSES", "ProteinStructure",
    "Residue", "SSE3_ALPHABET", "THREE_DI_ALPHABET", "TrackKind", "ValidationReport",
    "aa_class", "emit_pdb", "load_annotations", "make_track", "parse_pdb", "sequence_string",
    "validate_backbone",
]

