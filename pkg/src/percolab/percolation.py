"""Bernoulli edge configurations, cluster labeling, boundaries and minimal cuts.

Sampling is counter-based: the open bit of edge e in sample i is a pure
function of (seed, sample_index, edge id) through a Philox stream keyed by
(seed, sample_index), so distinct samples regenerate independently and
byte-identically in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvariantViolation, MarginViolation
from .lattice import LatticeWindow


def _uniforms(window: LatticeWindow, seed: int, sample_index: int) -> np.ndarray:
    key = np.array([seed, sample_index], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(window.n_edges)


@dataclass(frozen=True)
class Configuration:
    """One open/closed bit per canonical edge of a window."""

    window: LatticeWindow
    p: float
    seed: int
    sample_index: int
    open_: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.open_.shape != (self.window.n_edges,):
            raise ValueError("bit count must equal window edge count")

    def replace_bits(self, open_: np.ndarray) -> "Configuration":
        """Derived configuration with the same provenance header."""
        return Configuration(self.window, self.p, self.seed, self.sample_index, open_)


def sample(window: LatticeWindow, p: float, seed: int = 0, sample_index: int = 0) -> Configuration:
    """Each edge open independently with probability p, keyed per (seed, sample_index, edge)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    open_ = _uniforms(window, seed, sample_index) < p
    return Configuration(window, float(p), int(seed), int(sample_index), open_)


def sample_coupled(window: LatticeWindow, ps, seed: int = 0, sample_index: int = 0) -> dict:
    """Configurations at several parameters sharing one uniform stream.

    Common random numbers: the same edge uniforms are thresholded at each p,
    so the configurations are monotone-coupled across p.
    """
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p={p} outside [0, 1]")
    u = _uniforms(window, seed, sample_index)
    return {
        float(p): Configuration(window, float(p), int(seed), int(sample_index), u < p)
        for p in ps
    }


def save_configuration(config: Configuration, path) -> None:
    """Raw bit blob plus a JSON header (window spec, p, seed, sample_index)."""
    header = {
        "window": config.window.spec(),
        "p": config.p,
        "seed": config.seed,
        "sample_index": config.sample_index,
        "n_edges": config.window.n_edges,
    }
    blob = np.packbits(config.open_)
    with open(path, "wb") as fh:
        head = json.dumps(header, sort_keys=True).encode()
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        fh.write(blob.tobytes())


def load_configuration(path) -> Configuration:
    with open(path, "rb") as fh:
        n = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(n).decode())
        blob = np.frombuffer(fh.read(), dtype=np.uint8)
    w = LatticeWindow(**header["window"])
    open_ = np.unpackbits(blob, count=header["n_edges"]).astype(bool)
    return Configuration(w, header["p"], header["seed"], header["sample_index"], open_)


# ---------------------------------------------------------------------- #
# cluster labeling


@dataclass
class ClusterLabeling:
    """Connected components of the open subgraph of one configuration.

    labels: per-vertex component label, 0..n_clusters-1.
    root: per-label minimum canonical vertex id (deterministic root choice).
    size: per-label vertex count.
    touches: per-label flag, True when some member lies on the outermost layer.
    extent_lo/hi: per-label min/max of the L1 diameter functionals.
    """

    window: LatticeWindow
    labels: np.ndarray
    n_clusters: int
    root: np.ndarray
    size: np.ndarray
    touches: np.ndarray
    extent_lo: np.ndarray
    extent_hi: np.ndarray
    coord_lo: np.ndarray
    coord_hi: np.ndarray

    def root_of(self, vertex: int) -> int:
        return int(self.root[self.labels[vertex]])

    def label_of_root(self, root: int) -> int:
        return int(self.labels[root])

    def diameter(self, label: int) -> int:
        """Exact L1 diameter of the cluster's vertex set."""
        return int(np.max(self.extent_hi[label] - self.extent_lo[label]))

    def vertices_of(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    @cached_property
    def origin_label(self) -> int:
        return int(self.labels[self.window.origin_index])

    @property
    def origin_is_finite(self) -> bool:
        """Finite-volume surrogate: the origin cluster does not touch the rim."""
        return not bool(self.touches[self.origin_label])

    @cached_property
    def infinite_label(self) -> int:
        """Largest rim-touching cluster, ties broken by minimum root id; -1 if none."""
        cands = np.flatnonzero(self.touches)
        if cands.size == 0:
            return -1
        order = np.lexsort((self.root[cands], -self.size[cands]))
        return int(cands[order[0]])


def origin_cluster_bfs(config: Configuration):
    """Vertices of the origin cluster, or None when it reaches the rim.

    Vectorized breadth-first exploration from the origin over open edges; it
    stops at first rim contact, so rim-touching (infinite-surrogate) clusters
    are detected without full labeling.
    """
    w = config.window
    visited = np.zeros(w.n_vertices, dtype=bool)
    visited[w.origin_index] = True
    frontier = np.array([w.origin_index], dtype=np.int64)
    if w.rim_mask[w.origin_index]:
        return None
    while frontier.size:
        nxt = []
        for a in range(w.d):
            stride = int(w.strides[a])
            up_edge = w.edge_index[frontier, a]
            ok = up_edge >= 0
            ok[ok] = config.open_[up_edge[ok]]
            nxt.append(frontier[ok] + stride)
            down = frontier - stride
            okd = frontier % (stride * w.side) >= stride  # coordinate a > 0
            down_edge = np.where(okd, w.edge_index[np.maximum(down, 0), a], -1)
            okd &= down_edge >= 0
            okd[okd] = config.open_[down_edge[okd]]
            nxt.append(frontier[okd] - stride)
        if not nxt:
            break
        cand = np.unique(np.concatenate(nxt))
        cand = cand[~visited[cand]]
        if cand.size == 0:
            break
        if w.rim_mask[cand].any():
            return None
        visited[cand] = True
        frontier = cand
    return np.flatnonzero(visited)


def clusters(config: Configuration) -> ClusterLabeling:
    """Label the connected components of the subgraph spanned by open edges."""
    w = config.window
    open_ids = np.flatnonzero(config.open_)
    rows = w.edge_lower[open_ids]
    cols = w.edge_upper[open_ids]
    graph = coo_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)),
        shape=(w.n_vertices, w.n_vertices),
    )
    _, raw = connected_components(graph, directed=False)
    return _labeling_from_labels(w, raw)


def _labeling_from_labels(w: LatticeWindow, raw: np.ndarray) -> ClusterLabeling:
    order = np.argsort(raw, kind="stable")
    sorted_labels = raw[order]
    starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    n = starts.size
    root = order[starts].astype(np.int64)  # stable sort keeps vertex ids ascending
    size = np.bincount(raw, minlength=n).astype(np.int64)
    touches = np.zeros(n, dtype=bool)
    touches[raw[w.rim_indices]] = True
    fv = w.functional_values[order]
    extent_lo = np.minimum.reduceat(fv, starts, axis=0)
    extent_hi = np.maximum.reduceat(fv, starts, axis=0)
    cv = w.all_coords[order]
    coord_lo = np.minimum.reduceat(cv, starts, axis=0)
    coord_hi = np.maximum.reduceat(cv, starts, axis=0)
    return ClusterLabeling(
        window=w,
        labels=raw.astype(np.int64),
        n_clusters=n,
        root=root,
        size=size,
        touches=touches,
        extent_lo=extent_lo,
        extent_hi=extent_hi,
        coord_lo=coord_lo,
        coord_hi=coord_hi,
    )


# ---------------------------------------------------------------------- #
# boundaries and cuts


def _vertex_mask(window: LatticeWindow, vertices) -> np.ndarray:
    mask = np.zeros(window.n_vertices, dtype=bool)
    mask[np.asarray(vertices, dtype=np.int64)] = True
    return mask


def edge_boundary(vertices, config: Configuration) -> np.ndarray:
    """Edges incident to the set that are not open edges inside it.

    vertices: flat ids of a set inducing a connected open subgraph.
    Returns sorted canonical edge ids.
    """
    w = config.window
    mask = _vertex_mask(w, vertices)
    lo_in = mask[w.edge_lower]
    hi_in = mask[w.edge_upper]
    incident = lo_in | hi_in
    internal_open = lo_in & hi_in & config.open_
    return np.flatnonzero(incident & ~internal_open)


def _outside_region(window: LatticeWindow, blocked_mask: np.ndarray) -> np.ndarray:
    """Vertices reachable from the rim without entering blocked_mask (axis steps)."""
    shape = (window.side,) * window.d
    free = ~blocked_mask.reshape(shape)
    seed = free & window.rim_mask.reshape(shape)
    structure = ndimage.generate_binary_structure(window.d, 1)
    out = ndimage.binary_propagation(seed, mask=free, structure=structure)
    return out.ravel()


def minimal_edge_cut(vertices, config: Configuration) -> np.ndarray:
    """Edges from the set to the rim-reaching component(s) of its complement.

    The complement is flood-filled from the outermost layer through all window
    edges (ambient lattice, not just open ones).  vertices must be a finite
    cluster: touching the rim is an error.
    """
    w = config.window
    mask = _vertex_mask(w, vertices)
    if np.any(mask & w.rim_mask):
        raise MarginViolation("vertex set touches the window rim (infinite surrogate)")
    outside = _outside_region(w, mask)
    lo_in = mask[w.edge_lower]
    hi_in = mask[w.edge_upper]
    lo_out = outside[w.edge_lower]
    hi_out = outside[w.edge_upper]
    return np.flatnonzero((lo_in & hi_out) | (hi_in & lo_out))


def cut_separates_from_rim(vertices, cut_edge_ids, window: LatticeWindow) -> bool:
    """True when removing the cut from the full window graph disconnects the set from the rim."""
    keep = np.ones(window.n_edges, dtype=bool)
    keep[np.asarray(cut_edge_ids, dtype=np.int64)] = False
    kept = np.flatnonzero(keep)
    graph = coo_matrix(
        (np.ones(kept.size, dtype=np.int8), (window.edge_lower[kept], window.edge_upper[kept])),
        shape=(window.n_vertices, window.n_vertices),
    )
    _, lab = connected_components(graph, directed=False)
    rim_labels = np.zeros(lab.max() + 1, dtype=bool)
    rim_labels[lab[window.rim_indices]] = True
    return not bool(np.any(rim_labels[lab[np.asarray(vertices, dtype=np.int64)]]))


def touching_edge_count(config: Configuration, labeling: ClusterLabeling | None = None) -> int:
    """Number of edges between the finite origin cluster and the infinite one."""
    lab = labeling if labeling is not None else clusters(config)
    o = lab.origin_label
    if lab.touches[o]:
        raise MarginViolation("origin cluster touches the rim (infinite)")
    inf = lab.infinite_label
    if inf < 0:
        raise InvariantViolation("no rim-touching cluster in the window")
    w = config.window
    a = lab.labels[w.edge_lower]
    b = lab.labels[w.edge_upper]
    between = ((a == o) & (b == inf)) | ((a == inf) & (b == o))
    return int(np.count_nonzero(between))
