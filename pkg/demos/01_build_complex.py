"""Build a combinatorial complex from a small synthetic protein.

A helix, a short loop and a second helix are generated, written out as PDB
text and parsed back, so the pipeline starts from the same input a user
would have on disk.
"""

import numpy as np

from protcc import (assign_sse, build_pcc, incidence, laplacian, outer_neighborhoods,
                    parse_pdb, validate_backbone)
from protcc.structure_io import emit_pdb
from protcc.synthetic import HELIX_PHI_PSI, from_torsions

phi = np.r_[np.full(12, HELIX_PHI_PSI[0]), np.full(4, -80.0), np.full(12, HELIX_PHI_PSI[0])]
psi = np.r_[np.full(12, HELIX_PHI_PSI[1]), np.full(4, 150.0), np.full(12, HELIX_PHI_PSI[1])]
text = emit_pdb(from_torsions(phi, psi, source_id="two_helices"))

s = parse_pdb(text, source_id="two_helices")
report = validate_backbone(s)
print(f"parsed {len(s.residues)} residues, chain breaks: {len(report.chain_breaks)}")

labels = assign_sse(s)
print("SSE:", "".join(labels.labels))

# k = 8 keeps the matrices small enough to print
cc = build_pcc(s, labels, k=8)
print(f"cells per rank: {cc.num_nodes} residues, {cc.num_edges} edges, "
      f"{cc.num_sse} SSEs, 1 protein")
for cell, label in zip(cc.sse_cells, cc.sse_labels):
    print(f"  {label} residues {cell[0]}..{cell[-1]}")

# Each edge has exactly one source and one target.
b01, b10 = incidence(cc, 0, 1), incidence(cc, 1, 0)
assert (np.asarray(b01.sum(axis=0)).ravel() == 1).all()
assert (np.asarray(b10.sum(axis=1)).ravel() == 1).all()

# The rank-2 Laplacian through residues counts shared residues: disjoint SSEs
# give a diagonal matrix holding the cell sizes.
print("L(2 via 0) =\n", laplacian(cc, 2, 0).toarray())

outer, entering, bridging = outer_neighborhoods(cc)
print("edges leaving each SSE:  ", np.asarray(outer.sum(axis=1)).ravel())
print("edges entering each SSE: ", np.asarray(entering.sum(axis=1)).ravel())
print("edges into another SSE:  ", np.asarray(bridging.sum(axis=1)).ravel())
