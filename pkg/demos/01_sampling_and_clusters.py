"""Sampling bond configurations and reading off cluster structure.

A LatticeWindow is a finite cube of Z^d with a renormalized box grid on top.
Configurations are one bit per edge, generated counter-based so that any
(seed, sample_index) pair regenerates identically, in any order, forever.
"""

import numpy as np

from percolab import LatticeWindow, clusters, edge_boundary, minimal_edge_cut, sample
from percolab.percolation import cut_separates_from_rim

w = LatticeWindow(d=2, N=10, R=5)
print(f"window: {w} -> {w.n_vertices} vertices, {w.n_edges} edges")

# supercritical sample: one giant cluster plus dust
cfg = sample(w, p=0.6, seed=1, sample_index=0)
lab = clusters(cfg)
print(f"p=0.6: {lab.n_clusters} clusters; largest {lab.size.max()} vertices")
print(f"origin cluster size {lab.size[lab.origin_label]}, "
      f"touches rim: {bool(lab.touches[lab.origin_label])}")

# the same sample again, bit for bit
again = sample(w, p=0.6, seed=1, sample_index=0)
print("regeneration identical:", bool(np.array_equal(cfg.open_, again.open_)))

# find a sample with a finite origin cluster and carve out its boundary
for i in range(200):
    cfg = sample(w, p=0.52, seed=2, sample_index=i)
    lab = clusters(cfg)
    o = lab.origin_label
    if not lab.touches[o] and lab.size[o] >= 4:
        break
else:
    raise SystemExit("no suitable sample found")
verts = lab.vertices_of(o)
print(f"\nsample {i}: finite origin cluster of {verts.size} vertices, "
      f"L1 diameter {lab.diameter(o)}")

boundary = edge_boundary(verts, cfg)
cut = minimal_edge_cut(verts, cfg)
print(f"edge boundary: {boundary.size} edges; minimal cut to the rim side: {cut.size}")
print("cut is a subset of the boundary:", bool(np.isin(cut, boundary).all()))
print("cut edges all closed:", bool((~cfg.open_[cut]).all()))
print("removing the cut disconnects the cluster from the rim:",
      cut_separates_from_rim(verts, cut, w))
