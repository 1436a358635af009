"""Reference numpy forward pass of the topology-complete perceptron network.

Shapes: scalar features are ``(n, d_s)`` and vector features ``(n, d_v, 3)``.
Vector-channel maps act on the channel axis only and carry neither bias
nor pointwise nonlinearity, so every vector path commutes with rotations.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .complex import ProteinCC, incidence, outer_neighborhoods
from .errors import BadConfig, MissingProteinChannel, ShapeMismatch
from .features import SCALAR_WIDTHS, VECTOR_WIDTHS, FeatureBundle, centered_coords
from .frames import edge_frames, mean_frames, robust_protein_frame, scalarize_batch

LN_EPS = 1e-5
VEC_EPS = 1e-8


class Readout(enum.Enum):
    MEAN_POOL = "mean"
    SUM_POOL = "sum"
    PROTEIN_CHANNEL = "protein"


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and depth. Vector widths default to scalar width / 8."""

    scalar_dims: tuple = (128, 32, 128, 128)
    vector_dims: Optional[tuple] = None
    input_scalar_dims: tuple = SCALAR_WIDTHS
    input_vector_dims: tuple = VECTOR_WIDTHS
    num_layers: int = 6
    bottleneck: int = 4
    embed_bottleneck: int = 1
    msg_depth: int = 2
    protein_channel: bool = True
    readout: str = "mean"
    seed: int = 0

    def __post_init__(self):
        if self.vector_dims is None:
            object.__setattr__(self, "vector_dims", tuple(max(1, d // 8) for d in self.scalar_dims))
        for name in ("scalar_dims", "vector_dims", "input_scalar_dims", "input_vector_dims"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        Readout(self.readout)

    def validate(self):
        if self.num_layers < 1:
            raise BadConfig("num_layers must be >= 1")
        if self.msg_depth < 0:
            raise BadConfig("msg_depth must be >= 0")
        if len(self.scalar_dims) != 4 or len(self.vector_dims) != 4:
            raise BadConfig("need one dimension per rank")
        for dv in self.input_vector_dims:
            if dv % self.embed_bottleneck:
                raise BadConfig(f"input vector width {dv} not divisible by {self.embed_bottleneck}")
        for name, dv in self.layer_vector_inputs().items():
            if dv % self.bottleneck:
                raise BadConfig(f"{name} vector width {dv} not divisible by bottleneck {self.bottleneck}")

    def layer_vector_inputs(self) -> dict:
        v0, v1, v2, v3 = self.vector_dims
        out = {
            "msg_in": 2 * v0 + v1 + 2 * v2,
            "sse": v2 + v0 + v1 + v0,
            "node": v0 + v2 + v0,
            "protein": v0 + v2 + v3,
        }
        if self.msg_depth:
            out["msg_block"] = v0
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in names})


@dataclass(frozen=True, eq=False)
class TcpParams:
    """One perceptron: vector reduction, bottleneck, scalar MLP, vector up-map, gate."""

    v_reduce: np.ndarray  # (3, d_v_in)
    v_down: np.ndarray    # (d_v_in / lambda, d_v_in)
    s_out_w: np.ndarray   # (d_s_out, d_s_in + 9 + d_v_in / lambda)
    s_out_b: np.ndarray   # (d_s_out,)
    v_up: np.ndarray      # (d_v_out, d_v_in / lambda)
    gate_w: np.ndarray    # (d_v_out, d_s_out)
    gate_b: np.ndarray    # (d_v_out,)

    @property
    def in_dims(self):
        hidden = self.v_down.shape[0]
        return self.s_out_w.shape[1] - 9 - hidden, self.v_reduce.shape[1]

    @property
    def out_dims(self):
        return self.s_out_w.shape[0], self.v_up.shape[0]


@dataclass(frozen=True, eq=False)
class NormParams:
    gamma: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True, eq=False)
class LayerParams:
    msg_in: TcpParams
    msg_blocks: tuple
    attn: np.ndarray
    sse_tcp: TcpParams
    node_tcp: TcpParams
    protein_tcp: TcpParams
    norm0: NormParams
    norm2: NormParams
    norm3: NormParams


@dataclass(frozen=True, eq=False)
class ModelParams:
    config: ModelConfig
    embed_norms: tuple  # NormParams per rank
    embed_tcps: tuple   # TcpParams per rank
    layers: tuple       # LayerParams

    @property
    def dtype(self):
        return self.embed_tcps[0].s_out_w.dtype

    def named_arrays(self):
        """(name, array) pairs in declaration order."""
        return list(_walk(self, ""))

    def astype(self, dtype) -> "ModelParams":
        return _map_arrays(self, lambda a: a.astype(dtype))


def _walk(obj, prefix):
    if isinstance(obj, np.ndarray):
        yield prefix, obj
    elif isinstance(obj, tuple):
        for k, item in enumerate(obj):
            yield from _walk(item, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (TcpParams, NormParams, LayerParams, ModelParams)):
        for f in fields(obj):
            if f.name == "config":
                continue
            yield from _walk(getattr(obj, f.name), f"{prefix}.{f.name}" if prefix else f.name)


def _map_arrays(obj, fn):
    if isinstance(obj, np.ndarray):
        return fn(obj)
    if isinstance(obj, tuple):
        return tuple(_map_arrays(x, fn) for x in obj)
    if isinstance(obj, (TcpParams, NormParams, LayerParams, ModelParams)):
        changes = {f.name: _map_arrays(getattr(obj, f.name), fn)
                   for f in fields(obj) if f.name != "config"}
        return replace(obj, **changes)
    return obj


def rebuild_params(template: ModelParams, arrays: Sequence[np.ndarray]) -> ModelParams:
    """Swap the arrays of ``template`` (in declaration order) for ``arrays``."""
    it = iter(arrays)
    return _map_arrays(template, lambda _: next(it))


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def _glorot(rng, fan_out, fan_in):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


def init_tcp(rng, in_dims, out_dims, bottleneck) -> TcpParams:
    ds_in, dv_in = in_dims
    ds_out, dv_out = out_dims
    if dv_in % bottleneck:
        raise BadConfig(f"vector width {dv_in} not divisible by bottleneck {bottleneck}")
    hidden = dv_in // bottleneck
    return TcpParams(
        v_reduce=_glorot(rng, 3, dv_in),
        v_down=_glorot(rng, hidden, dv_in),
        s_out_w=_glorot(rng, ds_out, ds_in + 9 + hidden),
        s_out_b=np.zeros(ds_out),
        v_up=_glorot(rng, dv_out, hidden),
        gate_w=_glorot(rng, dv_out, ds_out),
        gate_b=np.zeros(dv_out),
    )


def _norm(d):
    return NormParams(np.ones(d), np.zeros(d))


def init_params(config: ModelConfig = ModelConfig(), seed: Optional[int] = None) -> ModelParams:
    """Glorot-uniform weights from a seeded PCG64 stream; zero biases and attention."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    config.validate()
    rng = np.random.default_rng(config.seed)
    s0, s1, s2, s3 = config.scalar_dims
    v0, v1, v2, v3 = config.vector_dims
    dims = list(zip(config.scalar_dims, config.vector_dims))
    embed_norms = tuple(_norm(d) for d in config.input_scalar_dims)
    embed = tuple(
        init_tcp(rng, (config.input_scalar_dims[r], config.input_vector_dims[r]), dims[r],
                 config.embed_bottleneck)
        for r in range(4)
    )
    lam = config.bottleneck
    layers = []
    for _ in range(config.num_layers):
        msg_in = init_tcp(rng, (2 * s0 + s1 + 2 * s2, 2 * v0 + v1 + 2 * v2), (s0, v0), lam)
        blocks = tuple(init_tcp(rng, (s0, v0), (s0, v0), lam) for _ in range(config.msg_depth))
        layers.append(LayerParams(
            msg_in=msg_in,
            msg_blocks=blocks,
            attn=np.zeros(s0),
            sse_tcp=init_tcp(rng, (s2 + s0 + s1 + s0, v2 + v0 + v1 + v0), (s2, v2), lam),
            node_tcp=init_tcp(rng, (s0 + s2 + s0, v0 + v2 + v0), (s0, v0), lam),
            protein_tcp=init_tcp(rng, (s0 + s2 + s3, v0 + v2 + v3), (s3, v3), lam),
            norm0=_norm(s0), norm2=_norm(s2), norm3=_norm(s3),
        ))
    return ModelParams(config, embed_norms, embed, tuple(layers))


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def silu(x):
    return x / (1.0 + np.exp(-x))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gvp_layer_norm(bundle: FeatureBundle, norm: Optional[NormParams] = None) -> FeatureBundle:
    """Layer norm on scalar rows; vector rows divided by their RMS channel norm.

    Rows whose vectors are all zero stay zero.
    """
    s = bundle.scalars
    mu = s.mean(axis=1, keepdims=True)
    var = s.var(axis=1, keepdims=True)
    s_out = (s - mu) / np.sqrt(var + LN_EPS)
    if norm is not None:
        s_out = s_out * norm.gamma + norm.beta
    v = bundle.vectors
    if v.shape[1]:
        ms = np.sum(v * v, axis=(1, 2)) / v.shape[1]
        v = v / np.sqrt(np.maximum(ms, VEC_EPS))[:, None, None]
    return FeatureBundle(bundle.rank, s_out.astype(s.dtype, copy=False), v.astype(s.dtype, copy=False))


def frame_scalarizer(frames) -> Callable:
    """Scalarizer closure for per-row frames (n, 3, 3)."""
    return lambda block: scalarize_batch(block, frames)


def channel_map(weight, h_v):
    """Apply a (k, c) matrix to the channel axis of (n, c, 3) vectors."""
    n, c, _ = h_v.shape
    flat = h_v.transpose(0, 2, 1).reshape(n * 3, c) @ weight.T
    return flat.reshape(n, 3, -1).transpose(0, 2, 1)


def tcp_forward(p: TcpParams, h_s, h_v, scalarizer):
    """One perceptron pass; returns ``(h_s_out, h_v_out)``."""
    ds_in, dv_in = p.in_dims
    if h_s.ndim != 2 or h_s.shape[1] != ds_in or h_v.ndim != 3 or h_v.shape[1] != dv_in:
        raise ShapeMismatch(
            f"TCP expects ({ds_in} scalars, {dv_in} vectors), got "
            f"({h_s.shape[-1] if h_s.ndim == 2 else h_s.shape}, "
            f"{h_v.shape[1] if h_v.ndim == 3 else h_v.shape})")
    s = channel_map(p.v_reduce, h_v)
    z = channel_map(p.v_down, h_v)
    z_norm = np.sqrt(np.sum(z * z, axis=-1))
    h_cat = np.concatenate([h_s, scalarizer(s), z_norm], axis=1)
    h_s_out = silu(h_cat @ p.s_out_w.T + p.s_out_b)
    h_v_up = channel_map(p.v_up, z)
    gate = sigmoid(h_s_out @ p.gate_w.T + p.gate_b)
    return h_s_out, h_v_up * gate[:, :, None]


def neighborhood_sum(matrix, values):
    """``matrix @ values`` for sparse 0/1 matrices and (m, ...) values."""
    flat = values.reshape(values.shape[0], int(np.prod(values.shape[1:])))
    out = np.asarray(matrix @ flat, dtype=values.dtype)
    return out.reshape((matrix.shape[0],) + values.shape[1:])


def neighborhood_mean(matrix, values):
    """Row-wise mean over each row's support; empty rows give zeros."""
    total = neighborhood_sum(matrix, values)
    counts = np.asarray(matrix.sum(axis=1)).ravel()
    shape = (-1,) + (1,) * (values.ndim - 1)
    return total / np.where(counts == 0, 1, counts).astype(values.dtype).reshape(shape)


def _gather(values, index):
    """values[index] with zero rows where index < 0."""
    out = np.zeros((len(index),) + values.shape[1:], dtype=values.dtype)
    ok = index >= 0
    out[ok] = values[index[ok]]
    return out


@dataclass(frozen=True, eq=False)
class Context:
    """Per-protein geometry and neighborhoods shared by all layers."""

    cc: ProteinCC
    frames: tuple  # per rank: (n_r, 3, 3)
    b20: object
    b21: object
    b30: object
    bridging: object
    incoming: object  # (N, E): edges entering each node
    cell_of_node: np.ndarray

    @classmethod
    def build(cls, cc: ProteinCC, dtype=np.float64) -> "Context":
        x = centered_coords(cc)
        pf = robust_protein_frame(x)
        ef = edge_frames(x[cc.edges[:, 0]], x[cc.edges[:, 1]])
        nf = mean_frames(incidence(cc, 0, 1), ef, fallback=pf)
        bridging = outer_neighborhoods(cc)[2]
        sf = mean_frames(bridging, ef, fallback=pf)
        frames = tuple(f.astype(dtype) for f in (nf, ef, sf, pf[None]))
        return cls(cc, frames, incidence(cc, 2, 0), incidence(cc, 2, 1), incidence(cc, 3, 0),
                   bridging, incidence(cc, 1, 0).T.tocsr(), cc.cell_of_node)

    def scalarizer(self, rank):
        return frame_scalarizer(self.frames[rank])


def _cat(*parts):
    return (np.concatenate([p[0] for p in parts], axis=1),
            np.concatenate([p[1] for p in parts], axis=1))


def _pair(b: FeatureBundle):
    return b.scalars, b.vectors


# ---------------------------------------------------------------------------
# Model steps
# ---------------------------------------------------------------------------

def embed(features: Sequence[FeatureBundle], params: ModelParams, ctx: Context) -> tuple:
    """GVP layer norm then the rank-specific embedding TCP."""
    cfg = params.config
    out = []
    for r, bundle in enumerate(features):
        want = (cfg.input_scalar_dims[r], cfg.input_vector_dims[r])
        if bundle.widths != want:
            raise ShapeMismatch(f"rank {r}: features have widths {bundle.widths}, params expect {want}")
        b = gvp_layer_norm(bundle.astype(params.dtype), params.embed_norms[r])
        s, v = tcp_forward(params.embed_tcps[r], b.scalars, b.vectors, ctx.scalarizer(r))
        out.append(FeatureBundle(r, s, v))
    return tuple(out)


def edge_message_inputs(emb, ctx: Context):
    """Per-edge concatenation (h_src, h_dst, h_edge, n_src, n_dst)."""
    src, dst = ctx.cc.edges[:, 0], ctx.cc.edges[:, 1]
    h0s, h0v = _pair(emb[0])
    h2s, h2v = _pair(emb[2])
    cell = ctx.cell_of_node
    n_src = (_gather(h2s, cell[src]), _gather(h2v, cell[src]))
    n_dst = (_gather(h2s, cell[dst]), _gather(h2v, cell[dst]))
    return _cat((h0s[src], h0v[src]), (h0s[dst], h0v[dst]), _pair(emb[1]), n_src, n_dst)


def edge_message(layer: LayerParams, emb, ctx: Context):
    """Edge messages: input TCP, residual TCP blocks, then a scalar attention gate."""
    sc = ctx.scalarizer(1)
    h_s, h_v = tcp_forward(layer.msg_in, *edge_message_inputs(emb, ctx), sc)
    for block in layer.msg_blocks:
        ds, dv = tcp_forward(block, h_s, h_v, sc)
        h_s, h_v = h_s + ds, h_v + dv
    att = sigmoid(h_s @ layer.attn)
    return h_s * att[:, None], h_v


def sse_update_inputs(emb, messages, ctx: Context):
    """(own embedding, mean member nodes, mean inner edges, mean bridging messages)."""
    nodes = (neighborhood_mean(ctx.b20, emb[0].scalars), neighborhood_mean(ctx.b20, emb[0].vectors))
    inner = (neighborhood_mean(ctx.b21, emb[1].scalars), neighborhood_mean(ctx.b21, emb[1].vectors))
    outer = (neighborhood_mean(ctx.bridging, messages[0]),
             neighborhood_mean(ctx.bridging, messages[1]))
    return _cat(_pair(emb[2]), nodes, inner, outer)


def sse_update(layer: LayerParams, emb, messages, ctx: Context):
    return tcp_forward(layer.sse_tcp, *sse_update_inputs(emb, messages, ctx), ctx.scalarizer(2))


def node_update_inputs(emb, messages, u2, ctx: Context):
    """(own embedding, parent-SSE update or zeros, mean incoming messages)."""
    parent = (_gather(u2[0], ctx.cell_of_node), _gather(u2[1], ctx.cell_of_node))
    incoming = (neighborhood_mean(ctx.incoming, messages[0]),
                neighborhood_mean(ctx.incoming, messages[1]))
    return _cat(_pair(emb[0]), parent, incoming)


def node_update(layer: LayerParams, emb, messages, u2, ctx: Context):
    return tcp_forward(layer.node_tcp, *node_update_inputs(emb, messages, u2, ctx), ctx.scalarizer(0))


def protein_update_inputs(u0, u2, emb3, ctx: Context):
    """(mean node update, mean per-node parent-SSE update, protein embedding)."""
    parent_s = _gather(u2[0], ctx.cell_of_node)
    parent_v = _gather(u2[1], ctx.cell_of_node)
    pooled = (neighborhood_mean(ctx.b30, u0[0]), neighborhood_mean(ctx.b30, u0[1]))
    pooled2 = (neighborhood_mean(ctx.b30, parent_s), neighborhood_mean(ctx.b30, parent_v))
    return _cat(pooled, pooled2, _pair(emb3))


def protein_update(layer: LayerParams, u0, u2, emb3, ctx: Context):
    return tcp_forward(layer.protein_tcp, *protein_update_inputs(u0, u2, emb3, ctx),
                       ctx.scalarizer(3))


def apply_residual_ln(layer: LayerParams, emb, updates) -> tuple:
    """h' = LN(u + h) for ranks 0, 2, 3; a ``None`` update leaves that rank as is.

    Rank 1 is never updated.
    """
    norms = {0: layer.norm0, 2: layer.norm2, 3: layer.norm3}
    out = list(emb)
    for r in (0, 2, 3):
        u = updates[r]
        if u is None:
            continue
        h = emb[r]
        if u[0].shape != h.scalars.shape or u[1].shape != h.vectors.shape:
            raise ShapeMismatch(f"rank {r}: update {u[0].shape}/{u[1].shape} vs "
                                f"embedding {h.scalars.shape}/{h.vectors.shape}")
        out[r] = gvp_layer_norm(FeatureBundle(r, u[0] + h.scalars, u[1] + h.vectors), norms[r])
    return tuple(out)


def interaction_layer(layer: LayerParams, emb, ctx: Context, protein_channel=True):
    m = edge_message(layer, emb, ctx)
    u2 = sse_update(layer, emb, m, ctx)
    u0 = node_update(layer, emb, m, u2, ctx)
    u3 = protein_update(layer, u0, u2, emb[3], ctx) if protein_channel else None
    return apply_residual_ln(layer, emb, (u0, None, u2, u3))


def forward(params: ModelParams, cc: ProteinCC, features: Sequence[FeatureBundle],
            ctx: Optional[Context] = None) -> tuple:
    """Embedding followed by ``num_layers`` interaction layers; returns per-rank bundles."""
    if ctx is None:
        ctx = Context.build(cc, params.dtype)
    emb = embed(features, params, ctx)
    for layer in params.layers:
        emb = interaction_layer(layer, emb, ctx, params.config.protein_channel)
    return emb


def readout(final_emb, mode="mean", protein_channel=True) -> np.ndarray:
    """Protein-level vector from node pooling or the rank-3 channel."""
    mode = Readout(mode.value if isinstance(mode, Readout) else mode)
    if mode is Readout.MEAN_POOL:
        return final_emb[0].scalars.mean(axis=0)
    if mode is Readout.SUM_POOL:
        return final_emb[0].scalars.sum(axis=0)
    if not protein_channel:
        raise MissingProteinChannel("protein readout requested but the rank-3 channel is disabled")
    return final_emb[3].scalars[0]
