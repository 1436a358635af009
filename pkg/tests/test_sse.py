import numpy as np
import pytest

from protcc.errors import MissingAtom
from protcc.geometry import random_rotation
from protcc.sse import (COUPLING, MIN_ENERGY, assign_sse, assign_sse8, energy_matrix, hbond_energy,
                        hbond_matrix)
from protcc.structure_io import ProteinStructure
from protcc.synthetic import ideal_helix, random_protein


def two_residue(n, c, o):
    coords = np.full((2, 4, 3), np.nan)
    coords[0, 1] = [0.0, 0.0, -5.0]
    coords[0, 2], coords[0, 3] = c, o
    coords[1, 0], coords[1, 1] = n, [0.0, 0.0, 6.0]
    return ProteinStructure.from_backbone(coords, chain_ids=["A", "B"])


def test_energy_of_linear_hbond():
    # collinear C=O ... H-N along z
    s = two_residue(n=[0, 0, 2.9], c=[0, 0, -1.23], o=[0, 0, 0])
    h = np.full((2, 3), np.nan)
    h[1] = [0.0, 0.0, 1.89]
    r_on, r_ch, r_oh, r_cn = 2.9, 3.12, 1.89, 4.13
    expected = COUPLING * (1 / r_on + 1 / r_ch - 1 / r_oh - 1 / r_cn)
    assert hbond_energy(s, 1, 0, hydrogens=h) == pytest.approx(expected, rel=1e-12)
    assert expected < -0.5


def test_energy_clamped_when_atoms_overlap():
    s = two_residue(n=[0, 0, 0.3], c=[0, 0, -1.23], o=[0, 0, 0])
    h = np.full((2, 3), np.nan)
    h[1] = [0.0, 0.0, 0.1]
    assert hbond_energy(s, 1, 0, hydrogens=h) == MIN_ENERGY


def test_missing_hydrogen_raises():
    s = two_residue(n=[0, 0, 2.9], c=[0, 0, -1.23], o=[0, 0, 0])
    with pytest.raises(MissingAtom):
        hbond_energy(s, 1, 0)


def test_helix_i_to_i_plus_4_bonds(helix):
    hb = hbond_matrix(energy_matrix(helix))
    # carbonyl i accepts from amide i+4 along the whole helix
    for i in range(0, 16):
        assert hb[i, i + 4]


def test_helix_interior_mostly_h(helix):
    labels = assign_sse(helix).labels
    interior = labels[1:-1]
    assert interior.count("H") / len(interior) >= 0.9


def test_hairpin_strands(hairpin):
    labels = assign_sse(hairpin).labels
    strands = list(range(1, 6)) + list(range(10, 15))
    assert sum(labels[i] == "E" for i in strands) / len(strands) >= 0.8
    assert set(labels[7:9]) <= {"C", "E"}


def test_short_chain_is_all_coil():
    assert assign_sse(ideal_helix(4)).labels == ("C",) * 4


def test_proline_never_donates():
    s = ideal_helix(12, sequence="AAAAAAPAAAAA")
    e = energy_matrix(s)
    assert np.isinf(e[:, 6]).all()


def test_assignment_is_rotation_invariant():
    rng = np.random.default_rng(4)
    s = random_protein(60, rng)
    moved = s.transformed(random_rotation(rng), rng.normal(size=3) * 30)
    assert "".join(assign_sse8(s)) == "".join(assign_sse8(moved))
