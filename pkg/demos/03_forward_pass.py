"""Run the reference forward pass and save everything it needs to disk."""

import tempfile
import time
from pathlib import Path

import numpy as np

from protcc import (ModelConfig, PccBundle, assign_sse, build_pcc, featurize, forward,
                    init_params, load_params, readout, save_params)
from protcc.synthetic import random_protein

s = random_protein(96, np.random.default_rng(3))
cc = build_pcc(s, assign_sse(s))
feats = featurize(cc, s)

config = ModelConfig()
params = init_params(config, seed=0)
print("layers:", config.num_layers, "| scalar dims:", config.scalar_dims,
      "| vector dims:", config.vector_dims)
print("parameters:", sum(a.size for _, a in params.named_arrays()))

t0 = time.perf_counter()
emb = forward(params, cc, feats)
print(f"forward: {time.perf_counter() - t0:.2f} s")
for b in emb:
    print(f"  rank {b.rank}: scalars {b.scalars.shape}, vectors {b.vectors.shape}")

for mode in ("mean", "sum", "protein"):
    vec = readout(emb, mode)
    print(f"readout {mode:>7}: width {vec.size}, first values {np.round(vec[:3], 4)}")

# Bundles and parameters round-trip bit-exactly, so a reloaded run repeats
# the original one to the last bit.
with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    PccBundle.build(cc, feats, source_id="demo").write(tmp / "demo.pcc")
    save_params(params, tmp / "params.tcpn")
    bundle = PccBundle.read(tmp / "demo.pcc")
    again = forward(load_params(tmp / "params.tcpn"), bundle.to_cc(), bundle.features)
print("reloaded run identical:",
      all(np.array_equal(a.scalars, b.scalars) and np.array_equal(a.vectors, b.vectors)
          for a, b in zip(emb, again)))
