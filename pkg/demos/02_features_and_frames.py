"""Per-rank features and the local frames used to make them invariant."""

import numpy as np

from protcc import SCALAR_WIDTHS, VECTOR_WIDTHS, assign_sse, build_pcc, featurize, incidence
from protcc.features import centered_coords, shape_descriptors
from protcc.frames import edge_frames, is_rotation, mean_frames, robust_protein_frame, scalarize
from protcc.geometry import random_rotation
from protcc.synthetic import random_protein

rng = np.random.default_rng(0)
s = random_protein(48, rng)
cc = build_pcc(s, assign_sse(s))
feats = featurize(cc, s)

names = ["residues", "edges", "SSEs", "protein"]
for name, b in zip(names, feats):
    print(f"{name:>8}: {b.scalars.shape[0]:4d} cells, {b.scalars.shape[1]:3d} scalars, "
          f"{b.vectors.shape[1]:3d} vectors")
assert tuple(b.widths[0] for b in feats) == SCALAR_WIDTHS
assert tuple(b.widths[1] for b in feats) == VECTOR_WIDTHS

# Shape descriptors of three reference spectra: a line, an isotropic blob, a plane.
np.set_printoptions(precision=4, suppress=True)
for spectrum in [(1.0, 0.0, 0.0), (1.0, 1.0, 1.0), (2.0, 1.0, 0.0)]:
    print(spectrum, shape_descriptors(spectrum, 8))

# Frames. Edge frames come from the two endpoints (relative to the protein
# centre); the protein frame from principal axes with signs fixed by the
# farthest residue.
x = centered_coords(cc)
ef = edge_frames(x[cc.edges[:, 0]], x[cc.edges[:, 1]])
pf = robust_protein_frame(x)
print("all edge frames proper rotations:", all(is_rotation(f) for f in ef))
print("protein frame:\n", pf)

# Scalarization is invariant when vectors and frame rotate together.
rot = random_rotation(rng)
v = feats[0].vectors[0]
print("invariance error:", np.abs(scalarize(v @ rot.T, ef[0] @ rot.T) - scalarize(v, ef[0])).max())

# A residue's frame is the mean of its outgoing edge frames. It is not itself a
# rotation, but projecting onto it equals the mean of the per-edge projections.
nf = mean_frames(incidence(cc, 0, 1), ef, fallback=pf)
print("node 0 frame is a rotation:", is_rotation(nf[0]))
