import numpy as np
import pytest

from protcc.checks import embedding_error, prepare, rel_err
from protcc.errors import BadConfig, MissingProteinChannel, ShapeMismatch
from protcc.features import FeatureBundle
from protcc.geometry import random_rotation
from protcc.synthetic import random_protein
from protcc.tcpnet import (Context, ModelConfig, apply_residual_ln, edge_message,
                           edge_message_inputs, embed, forward, frame_scalarizer, gvp_layer_norm,
                           init_params, init_tcp, interaction_layer, node_update, protein_update,
                           readout, sigmoid, silu, sse_update, tcp_forward)


def random_frames(rng, n):
    return np.stack([random_rotation(rng) for _ in range(n)])


def test_tcp_shapes_and_mismatch():
    rng = np.random.default_rng(0)
    p = init_tcp(rng, (10, 8), (6, 12), 4)
    assert p.v_down.shape == (2, 8) and p.in_dims == (10, 8) and p.out_dims == (6, 12)
    h_s, h_v = rng.normal(size=(5, 10)), rng.normal(size=(5, 8, 3))
    s, v = tcp_forward(p, h_s, h_v, frame_scalarizer(random_frames(rng, 5)))
    assert s.shape == (5, 6) and v.shape == (5, 12, 3)
    with pytest.raises(ShapeMismatch):
        tcp_forward(p, h_s[:, :9], h_v, frame_scalarizer(random_frames(rng, 5)))


def test_tcp_matches_hand_composition():
    rng = np.random.default_rng(1)
    p = init_tcp(rng, (4, 4), (3, 2), 2)
    p = type(p)(**{**p.__dict__, "s_out_b": rng.normal(size=3), "gate_b": rng.normal(size=2)})
    h_s, h_v = rng.normal(size=(1, 4)), rng.normal(size=(1, 4, 3))
    frame = random_rotation(rng)
    s_out, v_out = tcp_forward(p, h_s, h_v, frame_scalarizer(frame[None]))
    s = p.v_reduce @ h_v[0]
    z = p.v_down @ h_v[0]
    feats = np.concatenate([h_s[0], (s @ frame.T).ravel(), np.linalg.norm(z, axis=1)])
    hs = feats @ p.s_out_w.T + p.s_out_b
    hs = hs / (1 + np.exp(-hs))
    gate = 1 / (1 + np.exp(-(hs @ p.gate_w.T + p.gate_b)))
    np.testing.assert_allclose(s_out[0], hs, rtol=1e-13)
    np.testing.assert_allclose(v_out[0], (p.v_up @ z) * gate[:, None], rtol=1e-13)


def test_activations():
    assert silu(np.array(0.0)) == 0.0
    assert sigmoid(np.array(0.0)) == 0.5


def test_init_determinism_and_shapes():
    a, b = init_params(seed=3), init_params(seed=3)
    for (na, x), (nb, y) in zip(a.named_arrays(), b.named_arrays()):
        assert na == nb and x.tobytes() == y.tobytes()
    c = init_params(seed=4)
    assert not np.array_equal(a.layers[0].msg_in.s_out_w, c.layers[0].msg_in.s_out_w)
    assert all(np.all(layer.attn == 0) for layer in a.layers)
    assert a.config.vector_dims == (16, 4, 16, 16)
    assert len(a.layers) == 6 and len(a.layers[0].msg_blocks) == 2
    w = a.layers[0].node_tcp.s_out_w
    bound = np.sqrt(6.0 / sum(w.shape))
    assert np.abs(w).max() <= bound


def test_bottleneck_shapes():
    p = init_tcp(np.random.default_rng(0), (8, 16), (8, 16), 4)
    assert p.v_down.shape == (4, 16)
    with pytest.raises(BadConfig):
        init_params(ModelConfig(scalar_dims=(40, 32, 128, 128)))  # 40 / 8 = 5 vector channels


def test_layer_norm():
    rng = np.random.default_rng(2)
    b = FeatureBundle(0, rng.normal(size=(6, 20)) * 3 + 1, rng.normal(size=(6, 4, 3)))
    out = gvp_layer_norm(b)
    np.testing.assert_allclose(out.scalars.mean(1), 0, atol=1e-12)
    np.testing.assert_allclose(out.scalars.var(1), 1, atol=1e-4)
    np.testing.assert_allclose(np.mean(np.sum(out.vectors ** 2, axis=2), axis=1), 1, atol=1e-12)
    zero = gvp_layer_norm(FeatureBundle(0, np.ones((1, 3)), np.zeros((1, 2, 3))))
    assert np.all(zero.vectors == 0) and np.all(zero.scalars == 0)


def test_residual_zero_update_and_edges_untouched(prepared, small_params):
    cc, feats = prepared
    ctx = Context.build(cc)
    emb = embed(feats, small_params, ctx)
    layer = small_params.layers[0]
    zeros = {r: (np.zeros_like(emb[r].scalars), np.zeros_like(emb[r].vectors)) for r in (0, 2, 3)}
    out = apply_residual_ln(layer, emb, (zeros[0], None, zeros[2], zeros[3]))
    for r in (0, 2, 3):
        np.testing.assert_array_equal(out[r].scalars, gvp_layer_norm(emb[r], None).scalars)
    assert out[1] is emb[1]
    after = interaction_layer(layer, emb, ctx)
    assert after[1] is emb[1]
    with pytest.raises(ShapeMismatch):
        apply_residual_ln(layer, emb, (zeros[2], None, zeros[2], zeros[3]))


def test_attention_starts_at_one_half(prepared, small_params):
    cc, feats = prepared
    ctx = Context.build(cc)
    emb = embed(feats, small_params, ctx)
    layer = small_params.layers[0]
    sc = ctx.scalarizer(1)
    h_s, h_v = tcp_forward(layer.msg_in, *edge_message_inputs(emb, ctx), sc)
    for block in layer.msg_blocks:
        ds, dv = tcp_forward(block, h_s, h_v, sc)
        h_s, h_v = h_s + ds, h_v + dv
    m_s, m_v = edge_message(layer, emb, ctx)
    np.testing.assert_array_equal(m_s, 0.5 * h_s)
    np.testing.assert_array_equal(m_v, h_v)


def test_single_layer_is_step_composition(prepared, small_params):
    cc, feats = prepared
    one = init_params(ModelConfig(scalar_dims=(32, 32, 32, 32), num_layers=1), seed=9)
    ctx = Context.build(cc)
    emb = embed(feats, one, ctx)
    layer = one.layers[0]
    m = edge_message(layer, emb, ctx)
    u2 = sse_update(layer, emb, m, ctx)
    u0 = node_update(layer, emb, m, u2, ctx)
    u3 = protein_update(layer, u0, u2, emb[3], ctx)
    manual = apply_residual_ln(layer, emb, (u0, None, u2, u3))
    for a, b in zip(forward(one, cc, feats), manual):
        assert a.scalars.tobytes() == b.scalars.tobytes()
        assert a.vectors.tobytes() == b.vectors.tobytes()


def test_embedded_widths(prepared, params):
    cc, feats = prepared
    out = forward(params, cc, feats)
    assert [b.widths for b in out] == [(128, 16), (32, 4), (128, 16), (128, 16)]
    assert [b.num_cells for b in out] == [cc.num_nodes, cc.num_edges, cc.num_sse, 1]


def test_wrong_feature_widths(prepared, small_params):
    cc, feats = prepared
    bad = (feats[0], feats[1], FeatureBundle(2, feats[2].scalars[:, :28], feats[2].vectors), feats[3])
    with pytest.raises(ShapeMismatch, match="rank 2"):
        forward(small_params, cc, bad)


def test_readouts(prepared, small_params):
    cc, feats = prepared
    out = forward(small_params, cc, feats)
    assert readout(out, "protein").shape == (32,)
    np.testing.assert_allclose(readout(out, "sum"), readout(out, "mean") * cc.num_nodes)
    perm = np.random.default_rng(0).permutation(cc.num_nodes)
    shuffled = (FeatureBundle(0, out[0].scalars[perm], out[0].vectors[perm]),) + out[1:]
    np.testing.assert_allclose(readout(shuffled, "mean"), readout(out, "mean"), atol=1e-6)
    single = (FeatureBundle(0, out[0].scalars[:1], out[0].vectors[:1]),) + out[1:]
    np.testing.assert_array_equal(readout(single, "mean"), readout(single, "sum"))
    with pytest.raises(MissingProteinChannel):
        readout(out, "protein", protein_channel=False)


def test_without_protein_channel(prepared):
    cc, feats = prepared
    p = init_params(ModelConfig(scalar_dims=(32, 32, 32, 32), num_layers=2, protein_channel=False))
    a = forward(p, cc, feats)
    emb3 = embed(feats, p, Context.build(cc))[3]
    np.testing.assert_array_equal(a[3].scalars, emb3.scalars)


def test_forward_deterministic(prepared, params):
    cc, feats = prepared
    a, b = forward(params, cc, feats), forward(params, cc, feats)
    for x, y in zip(a, b):
        assert x.scalars.tobytes() == y.scalars.tobytes()
        assert x.vectors.tobytes() == y.vectors.tobytes()


def test_float32_mode_equivariance(small_params):
    rng = np.random.default_rng(6)
    s = random_protein(30, rng)
    p32 = small_params.astype(np.float32)
    cc, feats = prepare(s)
    a = forward(p32, cc, feats)
    assert a[0].scalars.dtype == np.float32
    rot = random_rotation(rng)
    cc2, feats2 = prepare(s.transformed(rot, rng.normal(size=3) * 10))
    assert embedding_error(a, forward(p32, cc2, feats2), rot) < 1e-4


def test_rel_err_definition():
    assert rel_err([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rel_err([0.5], [0.0]) == 0.5
    assert rel_err([101.0], [100.0]) == pytest.approx(0.01)
