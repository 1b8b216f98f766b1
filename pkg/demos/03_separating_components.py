"""Separating components and the closed cut they guarantee.

Whenever the origin cluster is finite and spread out, the bad boxes around
its substantial boundary form a component that encloses the origin; keeping
the configuration on that component and its good boundary while opening
everything else still leaves the origin cut off, and the minimal edge cut of
that extension consists of closed edges sitting inside the component region.
"""

import numpy as np

from percolab import LatticeWindow, clusters, sample, touching_edge_count
from percolab.renorm import BoxClassifier
from percolab.separating import (
    build_separating_component,
    enumerate_occurring,
    extract_cut,
    occurs,
)
from percolab.percolation import cut_separates_from_rim
from percolab.verify import close_region_surface

w = LatticeWindow(d=2, N=10, R=7)

# a moat: close the surface of a box region in an otherwise open environment
def moat(radii):
    cfg = sample(w, p=1.0, seed=0, sample_index=0)
    for r in radii:
        grid = np.stack(np.meshgrid(*[np.arange(-r, r + 1)] * 2, indexing="ij"),
                        axis=-1).reshape(-1, 2)
        cfg = close_region_surface(cfg, [np.array(b) for b in grid])
    return cfg

cfg = moat([1])
lab = clusters(cfg)
cl = BoxClassifier(cfg, lab)
o = lab.origin_label
print(f"moated origin cluster: {lab.size[o]} vertices, diameter {lab.diameter(o)}")

S = build_separating_component(cfg, lab, cl)
print(f"separating component: {S.size} bad boxes, boundary of {S.boundary.size} good boxes")
print("occurs:", occurs(S, cfg, cl))

cut = extract_cut(S, cfg, cl)
print(f"extracted cut: {cut.cut_edges.size} closed edges")
print("cut disconnects the origin from the rim:",
      cut_separates_from_rim([w.origin_index], cut.cut_edges, w))

phi = touching_edge_count(cfg, lab)
print(f"touching edges to the rim cluster: {phi} <= cut size: {phi <= cut.cut_edges.size}")

# two nested moats: two disjoint occurring components
cfg2 = moat([1, 4])
occ = enumerate_occurring(cfg2, clusters(cfg2))
print(f"\nnested moats: {len(occ)} occurring components, "
      f"sizes {[s.size for s in occ]}, disjoint: "
      f"{len(set().union(*[s.box_set() for s in occ])) == sum(s.size for s in occ)}")
