import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from protcc import oracles
from protcc.checks import degenerate_frames
from protcc.complex import ProteinCC, incidence
from protcc.errors import CoincidentPoints, DegenerateCloud, IsolatedNode, ZeroCom
from protcc.frames import (disambiguate_signs, edge_frame, edge_frames, is_rotation, node_com_frame,
                           protein_frame, robust_protein_frame, scalarize, scalarize_rank0,
                           scalarize_rank2, sse_com_anchor_frame)
from protcc.geometry import random_rotation
from protcc.synthetic import random_complex

coords = arrays(np.float64, 3, elements=st.floats(-50, 50))


def test_edge_frame_hand_example():
    f = edge_frame(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    a1 = np.array([-1.0, 1, 0]) / np.sqrt(2)
    np.testing.assert_allclose(f[0], a1)
    np.testing.assert_allclose(f[1], [0, 0, -1])
    np.testing.assert_allclose(f[2], np.cross(a1, [0, 0, -1]))
    assert is_rotation(f)


def test_edge_frame_collinear_fallback():
    f = edge_frame(np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))
    np.testing.assert_allclose(f[0], [1, 0, 0])
    assert is_rotation(f)


def test_coincident_points():
    with pytest.raises(CoincidentPoints):
        edge_frame(np.ones(3), np.ones(3))


@settings(max_examples=100)
@given(coords, coords)
def test_edge_frames_are_rotations(a, b):
    if np.linalg.norm(a - b) < 1e-6:
        return
    assert is_rotation(edge_frame(a, b))


def test_edge_frame_equivariance():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 2, 3)) * 10
    rot = random_rotation(rng)
    f = edge_frames(x[:, 0], x[:, 1])
    g = edge_frames(x[:, 0] @ rot.T, x[:, 1] @ rot.T)
    np.testing.assert_allclose(g, f @ rot.T, atol=1e-6)


def test_all_fallbacks_are_rotations():
    for f in degenerate_frames():
        assert is_rotation(f)


def test_scalarize_basics():
    np.testing.assert_array_equal(scalarize([[1.0, 2, 3]], np.eye(3)), [1, 2, 3])
    np.testing.assert_array_equal(scalarize(np.zeros((4, 3)), random_rotation(np.random.default_rng(1))),
                                  np.zeros(12))


def test_scalarize_invariance():
    rng = np.random.default_rng(2)
    v, frame, rot = rng.normal(size=(5, 3)), random_rotation(rng), random_rotation(rng)
    np.testing.assert_allclose(scalarize(v @ rot.T, frame @ rot.T), scalarize(v, frame), atol=1e-12)


def test_rank0_single_edge_equals_plain_scalarize():
    x = np.array([[1.0, 0.5, 0], [0, 2.0, 1], [3, 0, 1.0]])
    cc = ProteinCC(3, [[0, 1], [1, 2], [2, 0]], (), (), x)
    ef = edge_frames(x[cc.edges[:, 0]], x[cc.edges[:, 1]])
    v = np.random.default_rng(3).normal(size=(3, 2, 3))
    out = scalarize_rank0(v, cc, ef)
    for i in range(3):
        np.testing.assert_allclose(out[i], scalarize(v[i], ef[i]), atol=1e-15)
    np.testing.assert_array_equal(scalarize_rank0(np.zeros((3, 2, 3)), cc, ef), 0.0)


def test_rank0_isolated_node():
    x = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 3.0]])
    cc = ProteinCC(3, [[0, 1]], (), (), x)
    ef = edge_frames(x[[0]], x[[1]])
    with pytest.raises(IsolatedNode):
        scalarize_rank0(np.ones((3, 1, 3)), cc, ef)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_rank0_matches_triplet_loop(seed):
    rng = np.random.default_rng(seed)
    cc = random_complex(rng, knn=3)
    x = cc.coords - cc.coords.mean(0)
    ef = edge_frames(x[cc.edges[:, 0]], x[cc.edges[:, 1]])
    pf = robust_protein_frame(x)
    v = rng.normal(size=(cc.num_nodes, 2, 3))
    got = scalarize_rank0(v, cc, ef, fallback=pf)
    want = np.zeros_like(got)
    count = np.zeros(cc.num_nodes)
    for i, e, _ in oracles.dense_triplets(oracles.incidence_dense(cc, 0, 1)):
        want[i] += scalarize(v[i], ef[e])
        count[i] += 1
    for i in np.nonzero(count == 0)[0]:  # nodes that are nobody's neighbour
        want[i], count[i] = scalarize(v[i], pf), 1
    np.testing.assert_allclose(got, want / count[:, None], rtol=0, atol=1e-12)


def test_rank2_fallback_to_protein_frame():
    x = np.array([[0, 0, 0], [1, 0, 0], [2, 0.5, 0], [9, 9, 1], [10, 9, 0], [11, 8, 2.0]])
    pf = robust_protein_frame(x - x.mean(0))
    cells = (np.arange(3), np.arange(3, 6))
    cc = ProteinCC(6, [[0, 1], [2, 3]], cells, ("H", "E"), x)
    ef = edge_frames(x[cc.edges[:, 0]], x[cc.edges[:, 1]])
    v = np.ones((2, 1, 3))
    out = scalarize_rank2(v, cc, ef, pf)
    np.testing.assert_allclose(out[0], scalarize(v[0], ef[1]))  # bridging edge 2 -> 3
    np.testing.assert_allclose(out[1], scalarize(v[1], pf))  # no bridging edge leaves cell 1


def test_protein_frame_properties():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(30, 3)) * [5, 2, 1]
    pts -= pts.mean(0)
    f = protein_frame(pts)
    assert is_rotation(f)
    far = pts[np.argmax(np.linalg.norm(pts, axis=1))]
    assert f[0] @ far >= 0 and f[1] @ far >= 0
    rot = random_rotation(rng)
    np.testing.assert_allclose(protein_frame(pts @ rot.T), f @ rot.T, atol=1e-6)


def test_protein_frame_degenerate():
    line = np.c_[np.arange(5.0) - 2, np.zeros(5), np.zeros(5)]
    with pytest.raises(DegenerateCloud):
        protein_frame(line)
    with pytest.raises(DegenerateCloud):
        protein_frame(line[:2])
    f = robust_protein_frame(line)
    assert is_rotation(f) and abs(abs(f[0, 0]) - 1) < 1e-12
    np.testing.assert_array_equal(robust_protein_frame(np.zeros((3, 3))), np.eye(3))


def test_sign_disambiguation_tie_break():
    out = disambiguate_signs(np.array([[0.0, -1, 0], [1.0, 0, 0]]), np.array([1.0, 0, 0]))
    np.testing.assert_array_equal(out, [[0, 1, 0], [1, 0, 0]])


def test_alternative_frames():
    f = node_com_frame([1.0, 0, 0], [[3.0, 0, 1], [3.0, 0, -1]])
    np.testing.assert_allclose(f[0], [1, 0, 0])
    assert is_rotation(f)
    f = sse_com_anchor_frame([2.0, 0, 0], [0, 5.0, 0])
    np.testing.assert_allclose(f[0], [-1, 0, 0])
    assert is_rotation(f)
    with pytest.raises(ZeroCom):
        sse_com_anchor_frame([0.0, 0, 0], [1.0, 0, 0])
