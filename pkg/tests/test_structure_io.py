import numpy as np
import pytest

from protcc.errors import LengthMismatch, MalformedRecord, NoBackbone, UnknownSymbol
from protcc.structure_io import (AA_AMBIGUOUS, AA_GAP, AA_UNKNOWN, TrackKind, aa_class, emit_pdb,
                                 load_annotations, parse_pdb, sequence_string, validate_backbone)
from protcc.synthetic import glycine_chain, two_fragment_chain


def atom_line(serial, name, resname, chain, resseq, xyz, occ=1.0, altloc=" ", record="ATOM  "):
    return (f"{record}{serial:5d}  {name:<3s}{altloc}{resname:>3s} {chain}{resseq:4d}    "
            f"{xyz[0]:8.3f}{xyz[1]:8.3f}{xyz[2]:8.3f}{occ:6.2f}{0.0:6.2f}           {name[0]}")


MINIMAL = "HEADER    TEST\n" + atom_line(1, "CA", "GLY", "A", 1, (0, 0, 0)) + "\nEND\n"


def test_minimal_single_ca():
    s = parse_pdb(MINIMAL)
    assert len(s) == 1
    np.testing.assert_array_equal(s.residues[0].ca_coord, [0.0, 0.0, 0.0])
    assert s.residues[0].n_coord is None


def test_bad_coordinate_reports_line():
    bad = MINIMAL.replace("   0.000   0.000   0.000", "     abc   0.000   0.000")
    with pytest.raises(MalformedRecord) as info:
        parse_pdb(bad)
    assert info.value.line_number == 2


def test_no_ca_raises():
    text = atom_line(1, "N", "GLY", "A", 1, (0, 0, 0)) + "\n"
    with pytest.raises(NoBackbone):
        parse_pdb(text)


def test_glycine_round_trip():
    s = parse_pdb(emit_pdb(glycine_chain(5)))
    assert len(s) == 5
    assert list(s.seq_index) == [0, 1, 2, 3, 4]
    assert not np.isnan(s.backbone).any()
    np.testing.assert_allclose(s.backbone, glycine_chain(5).backbone, atol=5e-4)


def test_altloc_keeps_highest_occupancy():
    lines = [
        atom_line(1, "CA", "ALA", "A", 1, (1, 0, 0), occ=0.3, altloc="A"),
        atom_line(2, "CA", "ALA", "A", 1, (2, 0, 0), occ=0.7, altloc="B"),
    ]
    s = parse_pdb("\n".join(lines))
    np.testing.assert_array_equal(s.ca[0], [2.0, 0.0, 0.0])


def test_hetatm_and_later_models_ignored():
    lines = [
        "MODEL        1",
        atom_line(1, "CA", "ALA", "A", 1, (0, 0, 0)),
        atom_line(2, "CA", "HOH", "A", 2, (5, 0, 0), record="HETATM"),
        "ENDMDL",
        "MODEL        2",
        atom_line(3, "CA", "ALA", "A", 1, (9, 9, 9)),
        atom_line(4, "CA", "ALA", "A", 2, (9, 9, 9)),
        "ENDMDL",
    ]
    s = parse_pdb("\n".join(lines))
    assert len(s) == 1
    np.testing.assert_array_equal(s.ca[0], [0.0, 0.0, 0.0])


def test_chains_are_indexed_separately():
    lines = [atom_line(1, "CA", "ALA", "A", 5, (0, 0, 0)),
             atom_line(2, "CA", "ALA", "A", 6, (3.8, 0, 0)),
             atom_line(3, "CA", "GLY", "B", 1, (20, 0, 0))]
    s = parse_pdb("\n".join(lines))
    assert list(s.chain_ids) == ["A", "A", "B"]
    assert list(s.seq_index) == [0, 1, 0]


def test_residue_classes():
    assert aa_class("ALA") == 0
    assert aa_class("TYR") == 19
    assert aa_class("ASX") == AA_AMBIGUOUS
    assert aa_class("Z") == AA_AMBIGUOUS
    assert aa_class("-") == AA_GAP
    assert aa_class("UNK") == AA_UNKNOWN
    assert aa_class("MSE") == AA_UNKNOWN


def test_validate_complete_helix(helix):
    report = validate_backbone(helix)
    assert report.ok
    assert report.n_residues == 20


def test_validate_missing_oxygen():
    text = "\n".join(ln for ln in emit_pdb(glycine_chain(5)).splitlines()
                     if not (ln[12:16].strip() == "O" and int(ln[22:26]) == 3))
    report = validate_backbone(parse_pdb(text))
    assert report.missing_o == (2,)
    assert report.missing_n == () and report.missing_c == ()


def test_validate_chain_break():
    report = validate_backbone(two_fragment_chain(50.0))
    assert len(report.chain_breaks) == 1
    i, j, d = report.chain_breaks[0]
    assert (i, j) == (2, 3) and d > 4.5


def test_annotations():
    track = load_annotations("H\nH\nE\nC\n\n", TrackKind.SSE3, 4)
    assert track.labels == ("H", "H", "E", "C")
    assert list(track.indices()) == [0, 0, 1, 2]
    assert load_annotations("HHEC", "SSE3").labels == track.labels
    with pytest.raises(LengthMismatch):
        load_annotations("HHE", TrackKind.SSE3, 4)
    with pytest.raises(UnknownSymbol):
        load_annotations("HXE", TrackKind.SSE3)
    assert len(load_annotations("ACDX", TrackKind.THREE_DI)) == 4


def test_sequence_string(helix):
    assert sequence_string(helix) == "G" * 20
