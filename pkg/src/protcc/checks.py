"""Seeded verification suites: equivariance, neighborhood algebra, geometry.

Each check yields a ``CheckResult`` whose ``line()`` is a single
machine-readable ``key=value`` record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import oracles
from .complex import adjacency, build_pcc, degree, incidence, laplacian, outer_neighborhoods
from .features import FeatureBundle, featurize, shape_descriptors
from .frames import (edge_frames, is_rotation, node_com_frame, robust_protein_frame,
                     sse_com_anchor_frame)
from .geometry import dihedral, random_rotation
from .sse import assign_sse
from .synthetic import chiral_fixture, mirrored, random_complex, random_protein
from .tcpnet import (Context, ModelConfig, TcpParams, edge_message, embed, forward,
                     frame_scalarizer, init_params, init_tcp, neighborhood_mean, node_update,
                     protein_update, sse_update, tcp_forward)

SUITES = ("equivariance", "algebra", "geometry")
EQUIVARIANCE_TOL = 1e-9
REFLECTION_MIN = 1e-4
FRAME_TOL = 1e-6


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    limit: float
    relation: str  # "<=" or ">" or "=="
    seed: int
    trials: int = 1

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"check={self.suite}.{self.name} status={status} value={self.value:.3e} "
                f"{'limit' if self.relation == '<=' else 'floor' if self.relation == '>' else 'expect'}"
                f"={self.limit:.1e} trials={self.trials} seed={self.seed}")


def rel_err(a, b) -> float:
    """max|a - b| / max(1, max|b|); zero for empty arrays."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def prepare(s, k=16):
    cc = build_pcc(s, assign_sse(s), k)
    return cc, featurize(cc, s)


def _rotated_bundle(b: FeatureBundle, rot):
    return FeatureBundle(b.rank, b.scalars, b.vectors @ rot.T)


def embedding_error(a, b, rot) -> float:
    """Worst relative deviation between run ``b`` and run ``a`` mapped by ``rot``."""
    worst = 0.0
    for x, y in zip(a, b):
        worst = max(worst, rel_err(y.scalars, x.scalars), rel_err(y.vectors, x.vectors @ rot.T))
    return worst


def _pair_error(a, b, rot) -> float:
    return max(rel_err(b[0], a[0]), rel_err(b[1], a[1] @ rot.T))


# ---------------------------------------------------------------------------
# Equivariance
# ---------------------------------------------------------------------------

def full_forward_equivariance(rng, proteins, transforms, params, sizes=(16, 64)) -> float:
    worst = 0.0
    for _ in range(proteins):
        s = random_protein(int(rng.integers(sizes[0], sizes[1] + 1)), rng)
        cc, feats = prepare(s)
        base = forward(params, cc, feats)
        for _ in range(transforms):
            rot = random_rotation(rng)
            shift = rng.normal(scale=20.0, size=3)
            cc2, feats2 = prepare(s.transformed(rot, shift))
            worst = max(worst, embedding_error(base, forward(params, cc2, feats2), rot))
    return worst


def suboperation_errors(rng, params, trials) -> dict:
    """Rotation error of each message-passing step evaluated in isolation."""
    errs = {"tcp_forward": 0.0, "edge_message": 0.0, "sse_update": 0.0,
            "node_update": 0.0, "protein_update": 0.0}
    layer = params.layers[0]
    for _ in range(trials):
        # tcp_forward on random inputs and random frames
        p = init_tcp(rng, (6, 8), (5, 4), 4)
        n = 7
        h_s, h_v = rng.normal(size=(n, 6)), rng.normal(size=(n, 8, 3))
        frames = np.stack([random_rotation(rng) for _ in range(n)])
        rot = random_rotation(rng)
        a = _tcp(p, h_s, h_v, frames)
        b = _tcp(p, h_s, h_v @ rot.T, frames @ rot.T)
        errs["tcp_forward"] = max(errs["tcp_forward"], _pair_error(a, b, rot))

        s = random_protein(int(rng.integers(16, 41)), rng)
        rot = random_rotation(rng)
        runs = []
        for struct in (s, s.transformed(rot, rng.normal(scale=20.0, size=3))):
            cc, feats = prepare(struct)
            ctx = Context.build(cc)
            emb = embed(feats, params, ctx)
            runs.append((emb, ctx))
        (emb_a, ctx_a), (emb_b, ctx_b) = runs
        # feed the second run rotated copies of the first run's inputs so that
        # each step is tested on its own
        emb_b = tuple(_rotated_bundle(x, rot) for x in emb_a)
        m_a, m_b = edge_message(layer, emb_a, ctx_a), edge_message(layer, emb_b, ctx_b)
        errs["edge_message"] = max(errs["edge_message"], _pair_error(m_a, m_b, rot))
        m_b = (m_a[0], m_a[1] @ rot.T)
        u2_a, u2_b = sse_update(layer, emb_a, m_a, ctx_a), sse_update(layer, emb_b, m_b, ctx_b)
        errs["sse_update"] = max(errs["sse_update"], _pair_error(u2_a, u2_b, rot))
        u2_b = (u2_a[0], u2_a[1] @ rot.T)
        u0_a = node_update(layer, emb_a, m_a, u2_a, ctx_a)
        u0_b = node_update(layer, emb_b, m_b, u2_b, ctx_b)
        errs["node_update"] = max(errs["node_update"], _pair_error(u0_a, u0_b, rot))
        u0_b = (u0_a[0], u0_a[1] @ rot.T)
        u3_a = protein_update(layer, u0_a, u2_a, emb_a[3], ctx_a)
        u3_b = protein_update(layer, u0_b, u2_b, emb_b[3], ctx_b)
        errs["protein_update"] = max(errs["protein_update"], _pair_error(u3_a, u3_b, rot))
    return errs


def _tcp(p: TcpParams, h_s, h_v, frames):
    return tcp_forward(p, h_s, h_v, frame_scalarizer(frames))


def reflection_deviation(seeds=(0, 1, 2), config=ModelConfig()) -> float:
    """Smallest (over seeds) L-infinity scalar change caused by mirroring a chiral fixture."""
    s = chiral_fixture()
    cc, feats = prepare(s)
    cc_m, feats_m = prepare(mirrored(s))
    out = []
    for seed in seeds:
        params = init_params(config, seed=seed)
        a, b = forward(params, cc, feats), forward(params, cc_m, feats_m)
        out.append(max(float(np.max(np.abs(x.scalars - y.scalars))) for x, y in zip(a, b)))
    return min(out)


def equivariance_suite(seed=0, trials=5) -> Iterator[CheckResult]:
    rng = np.random.default_rng(seed)
    params = init_params(ModelConfig(), seed=seed)
    err = full_forward_equivariance(rng, trials, 2, params)
    yield CheckResult("equivariance", "full_forward", err <= EQUIVARIANCE_TOL, err,
                      EQUIVARIANCE_TOL, "<=", seed, trials)
    for name, e in suboperation_errors(rng, params, max(1, trials // 2)).items():
        yield CheckResult("equivariance", name, e <= EQUIVARIANCE_TOL, e, EQUIVARIANCE_TOL,
                          "<=", seed, max(1, trials // 2))
    dev = reflection_deviation((seed, seed + 1, seed + 2))
    yield CheckResult("equivariance", "reflection_sensitivity", dev > REFLECTION_MIN, dev,
                      REFLECTION_MIN, ">", seed, 3)


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------

_RANK_PAIRS = [(r, v) for r in range(4) for v in range(4) if r != v]


def algebra_suite(seed=0, trials=100) -> Iterator[CheckResult]:
    rng = np.random.default_rng(seed)
    complexes = [random_complex(rng) for _ in range(trials)]
    fails = {"outer_leaving": 0, "outer_entering": 0, "outer_bridging": 0,
             "incidence": 0, "laplacian_identity": 0, "shared_cell_adjacency": 0,
             "aggregation_mean": 0}
    for cc in complexes:
        outer, inn, bridging = outer_neighborhoods(cc)
        lo, en, br = oracles.outer_dense(cc)
        fails["outer_leaving"] += not np.array_equal(outer.toarray(), lo)
        fails["outer_entering"] += not np.array_equal(inn.toarray(), en)
        fails["outer_bridging"] += not np.array_equal(bridging.toarray(), br)
        ok_inc = ok_lap = ok_adj = True
        for r, v in _RANK_PAIRS:
            ok_inc &= np.array_equal(incidence(cc, r, v).toarray(), oracles.incidence_dense(cc, r, v))
            lap = oracles.laplacian_dense(cc, r, v)
            ok_lap &= np.array_equal(laplacian(cc, r, v).toarray(), lap)
            ok_lap &= np.array_equal(adjacency(cc, r, v).toarray() + degree(cc, r, v).toarray(), lap)
            if {r, v} != {0, 1}:
                ok_adj &= np.array_equal(adjacency(cc, r, v).toarray(),
                                         oracles.shared_cells_dense(cc, r, v))
        fails["incidence"] += not ok_inc
        fails["laplacian_identity"] += not ok_lap
        fails["shared_cell_adjacency"] += not ok_adj
        ok_agg = True
        mats = {
            (2, 0): oracles.incidence_dense(cc, 2, 0), (2, 1): oracles.incidence_dense(cc, 2, 1),
            (3, 0): oracles.incidence_dense(cc, 3, 0), "bridge": br,
            "in": oracles.incidence_dense(cc, 1, 0).T,
        }
        sparse = {(2, 0): incidence(cc, 2, 0), (2, 1): incidence(cc, 2, 1),
                  (3, 0): incidence(cc, 3, 0), "bridge": bridging,
                  "in": incidence(cc, 1, 0).T.tocsr()}
        for key, dense in mats.items():
            values = rng.normal(size=(dense.shape[1], 2, 3))
            want = oracles.loop_mean(oracles.dense_triplets(dense), values, dense.shape[0])
            ok_agg &= np.array_equal(neighborhood_mean(sparse[key], values), want)
        fails["aggregation_mean"] += not ok_agg
    for name, bad in fails.items():
        yield CheckResult("algebra", name, bad == 0, float(bad), 0.0, "==", seed, trials)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def _frame_defect(frames) -> float:
    frames = np.atleast_3d(frames).reshape(-1, 3, 3)
    ortho = np.abs(frames @ np.swapaxes(frames, 1, 2) - np.eye(3)).max()
    det = np.abs(np.linalg.det(frames) - 1.0).max()
    return float(max(ortho, det))


def degenerate_frames() -> list:
    """Frames from every forced fallback branch."""
    out = [
        edge_frames(np.array([[1.0, 0, 0]]), np.array([[2.0, 0, 0]]))[0],
        edge_frames(np.array([[0, 0, 3.0]]), np.array([[0, 0, -1.0]]))[0],
        node_com_frame([1.0, 2.0, 3.0], [[0.0, 2.0, 3.0], [2.0, 2.0, 3.0]]),
        node_com_frame([1.0, 1.0, 0.0], [[2.0, 2.0, 0.0]]),
        sse_com_anchor_frame([1.0, 0.0, 0.0], [2.0, 0.0, 0.0]),
        robust_protein_frame(np.array([[-1.0, 0, 0], [0, 0, 0], [1.0, 0, 0]])),
        robust_protein_frame(np.zeros((4, 3))),
    ]
    return out


def analytic_descriptor_error() -> float:
    ln = np.log
    cases = {
        (1.0, 0.0, 0.0): [1, 0, 0, 0, 1, 0, 1, 0],
        (1.0, 1.0, 1.0): [0, 0, 1, 1 / 3, 0, ln(3), 3, 1 / 3],
        (2.0, 1.0, 0.0): [0.5, 0.5, 0, 0, 1, -(2 / 3) * ln(2 / 3) - (1 / 3) * ln(1 / 3), 3, 0],
    }
    return max(float(np.max(np.abs(shape_descriptors(k, 8) - np.array(v)))) for k, v in cases.items())


def dihedral_symmetries(rng, count=1000):
    """Torsion angles are unchanged by reversing the chain and negated by a mirror.

    Returns the worst deviation of each identity.
    """
    p = rng.normal(size=(count, 4, 3))
    fwd = dihedral(p[:, 0], p[:, 1], p[:, 2], p[:, 3])
    rev = dihedral(p[:, 3], p[:, 2], p[:, 1], p[:, 0])
    m = p * np.array([1.0, 1.0, -1.0])
    mir = dihedral(m[:, 0], m[:, 1], m[:, 2], m[:, 3])
    return float(np.max(np.abs(fwd - rev))), float(np.max(np.abs(fwd + mir)))


def geometry_suite(seed=0, trials=100) -> Iterator[CheckResult]:
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=10.0, size=(trials, 2, 3))
    err = _frame_defect(edge_frames(pts[:, 0], pts[:, 1]))
    yield CheckResult("geometry", "edge_frames_orthonormal", err <= FRAME_TOL, err, FRAME_TOL,
                      "<=", seed, trials)
    clouds = [rng.normal(size=(int(rng.integers(3, 40)), 3)) * rng.uniform(0.1, 5, 3)
              for _ in range(trials)]
    err = _frame_defect(np.stack([robust_protein_frame(c - c.mean(0)) for c in clouds]))
    yield CheckResult("geometry", "protein_frames_orthonormal", err <= FRAME_TOL, err, FRAME_TOL,
                      "<=", seed, trials)
    degen = degenerate_frames()
    err = _frame_defect(np.stack(degen))
    ok = err <= FRAME_TOL and all(is_rotation(f) for f in degen)
    yield CheckResult("geometry", "degenerate_fallbacks", ok, err, FRAME_TOL, "<=", seed, len(degen))
    err = analytic_descriptor_error()
    yield CheckResult("geometry", "shape_descriptors", err <= 1e-12, err, 1e-12, "<=", seed, 3)
    rev, mir = dihedral_symmetries(rng, 1000)
    yield CheckResult("geometry", "dihedral_reversal", rev <= 1e-9, rev, 1e-9, "<=", seed, 1000)
    yield CheckResult("geometry", "dihedral_mirror", mir <= 1e-9, mir, 1e-9, "<=", seed, 1000)


def run_suite(name: str, seed=0, trials=None) -> list:
    runners = {"equivariance": (equivariance_suite, 5), "algebra": (algebra_suite, 100),
               "geometry": (geometry_suite, 100)}
    names = SUITES if name == "all" else (name,)
    out = []
    for n in names:
        fn, default = runners[n]
        out.extend(fn(seed, default if trials is None else trials))
    return out
