"""Coarse-graining to the box lattice: substantial boxes, good boxes, and
uniqueness of the substantial cluster on good components.

A box is good when (a) some open cluster of the subgraph induced on it
touches all 2d faces, (b) the restriction of that crossing cluster to each of
the 3^d - 1 overlap boxes has a component touching all 2d faces of the
overlap, and (c) every other cluster of the box has L1 diameter < N/5.
Diameter comparisons are integer-exact (5*diam >= N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import MarginViolation
from .lattice import LatticeWindow
from .percolation import ClusterLabeling, Configuration, clusters, sample
from .stats import wilson_interval
from .util import chunked_map

GOOD = "good"
BAD = "bad"

OK = "ok"
NO_CROSSING = "no_crossing"
COMPETING_CLUSTER = "competing_cluster"
OVERLAP_NOT_CROSSED = "overlap_not_crossed"


@dataclass(frozen=True)
class BoxStatus:
    good: bool
    code: str                       # ok | no_crossing | competing_cluster | overlap_not_crossed
    crossing_rep: int | None        # min window-vertex id of the crossing cluster, if good


class _BoxGraph:
    """Components of the open subgraph induced on one box."""

    __slots__ = ("vertex_ids", "open_bits", "labels", "n", "diam", "rep", "crossing")

    def __init__(self, window: LatticeWindow, config: Configuration, box_flat: int):
        base = window.box_base_vertex(window.box_coords(box_flat)[0])
        vids = base + window._box_vertex_template
        e_low = window._box_edge_local_lower
        e_axis = window._box_edge_axis
        edge_ids = window.edge_index[vids[e_low], e_axis]
        bits = config.open_[edge_ids]
        s_strides = np.array(
            [window.box_side ** (window.d - 1 - a) for a in range(window.d)], dtype=np.int64
        )
        e_up = e_low + s_strides[e_axis]
        n_local = vids.size
        keep = np.flatnonzero(bits)
        graph = coo_matrix(
            (np.ones(keep.size, dtype=np.int8), (e_low[keep], e_up[keep])),
            shape=(n_local, n_local),
        )
        n, labels = connected_components(graph, directed=False)
        self.vertex_ids = vids
        self.open_bits = bits
        self.labels = labels
        self.n = n
        order = np.argsort(labels, kind="stable")
        starts = np.flatnonzero(np.r_[True, labels[order][1:] != labels[order][:-1]])
        self.rep = vids[order[starts]]
        fv = window.functional_values[vids][order]
        self.diam = np.max(
            np.maximum.reduceat(fv, starts, axis=0) - np.minimum.reduceat(fv, starts, axis=0),
            axis=1,
        )
        face_touch = np.zeros((n, 2 * window.d), dtype=bool)
        for i, face in enumerate(window._box_face_local):
            face_touch[labels[face], i] = True
        self.crossing = np.flatnonzero(face_touch.all(axis=1))


class BoxClassifier:
    """Lazy, memoized good/bad classification of boxes for one configuration."""

    def __init__(self, config: Configuration, labeling: ClusterLabeling | None = None):
        self.config = config
        self.window = config.window
        self.labeling = labeling
        self._graphs: dict[int, _BoxGraph] = {}
        self._status: dict[int, BoxStatus] = {}
        self._substantial: dict[int, frozenset] = {}

    def box_graph(self, box_flat: int) -> _BoxGraph:
        bg = self._graphs.get(box_flat)
        if bg is None:
            bg = _BoxGraph(self.window, self.config, box_flat)
            self._graphs[box_flat] = bg
        return bg

    def status(self, box_flat: int) -> BoxStatus:
        st = self._status.get(box_flat)
        if st is None:
            st = self._classify(box_flat)
            self._status[box_flat] = st
        return st

    def is_good(self, box_flat: int) -> bool:
        return self.status(box_flat).good

    def _classify(self, box_flat: int) -> BoxStatus:
        w = self.window
        coords = w.box_coords(box_flat)[0]
        if not w.box_interior(coords):
            raise MarginViolation(f"box {tuple(coords)} too close to the window edge")
        bg = self.box_graph(box_flat)
        if bg.crossing.size == 0:
            return BoxStatus(False, NO_CROSSING, None)
        if bg.crossing.size > 1:
            return BoxStatus(False, COMPETING_CLUSTER, None)
        cross = int(bg.crossing[0])
        others = np.ones(bg.n, dtype=bool)
        others[cross] = False
        if np.any(5 * bg.diam[others] >= w.N):
            return BoxStatus(False, COMPETING_CLUSTER, None)
        if not self._overlaps_crossed(bg, cross):
            return BoxStatus(False, OVERLAP_NOT_CROSSED, None)
        return BoxStatus(True, OK, int(bg.rep[cross]))

    def _overlaps_crossed(self, bg: _BoxGraph, cross: int) -> bool:
        """One block-diagonal component pass over all 3^d - 1 overlap boxes."""
        w = self.window
        member_local = bg.labels == cross
        rows, cols = [], []
        offsets = []
        off = 0
        states = []
        for ov in w._overlaps:
            mem = member_local[ov["local_vertices"]]
            e_open = bg.open_bits[ov["edge_template_idx"]]
            keep = e_open & mem[ov["e_low_pos"]] & mem[ov["e_up_pos"]]
            rows.append(ov["e_low_pos"][keep] + off)
            cols.append(ov["e_up_pos"][keep] + off)
            offsets.append(off)
            states.append(mem)
            off += ov["local_vertices"].size
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        graph = coo_matrix(
            (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(off, off)
        )
        _, labels = connected_components(graph, directed=False)
        for ov, mem, o in zip(w._overlaps, states, offsets):
            common = None
            for face in ov["faces"]:
                fmem = face[mem[face]]
                if fmem.size == 0:
                    return False
                labs = np.unique(labels[fmem + o])
                common = labs if common is None else np.intersect1d(common, labs, assume_unique=True)
                if common.size == 0:
                    return False
        return True

    def substantial_roots(self, box_flat: int) -> frozenset:
        """Global roots of clusters with a component of L1 diameter >= N/5 in this box."""
        if self.labeling is None:
            raise ValueError("substantial_roots needs a ClusterLabeling")
        got = self._substantial.get(box_flat)
        if got is None:
            bg = self.box_graph(box_flat)
            big = np.flatnonzero(5 * bg.diam >= self.window.N)
            got = frozenset(self.labeling.root_of(int(bg.rep[i])) for i in big)
            self._substantial[box_flat] = got
        return got


# ---------------------------------------------------------------------- #
# public operations


def is_substantial(box, cluster_root: int, config: Configuration,
                   labeling: ClusterLabeling | None = None,
                   classifier: BoxClassifier | None = None) -> bool:
    """True iff the cluster's trace in the box has a component of L1 diameter >= N/5."""
    cl = classifier or BoxClassifier(config, labeling or clusters(config))
    return cluster_root in cl.substantial_roots(cl.window.box_flat(box))


def is_good(box, config: Configuration, classifier: BoxClassifier | None = None) -> bool:
    cl = classifier or BoxClassifier(config)
    return cl.is_good(cl.window.box_flat(box))


@dataclass
class SubstantialSet:
    """Boxes where a cluster is substantial, plus the set's internal boundary.

    boxes: flat box ids of C(N); boundary: members of C(N) axis-adjacent to
    the rim-reaching component of the box-grid complement (the finite-volume
    reading of 'incident with an infinite component').
    """

    window: LatticeWindow
    root: int
    boxes: np.ndarray
    boundary: np.ndarray


def _axis_adjacent_to(mask: np.ndarray, window: LatticeWindow) -> np.ndarray:
    """Boolean box-grid mask of positions axis-adjacent to True cells of mask."""
    shape = (window.boxes_per_axis,) * window.d
    m = mask.reshape(shape)
    out = np.zeros(shape, dtype=bool)
    for a in range(window.d):
        sl_lo = [slice(None)] * window.d
        sl_hi = [slice(None)] * window.d
        sl_lo[a] = slice(None, -1)
        sl_hi[a] = slice(1, None)
        out[tuple(sl_lo)] |= m[tuple(sl_hi)]
        out[tuple(sl_hi)] |= m[tuple(sl_lo)]
    return out.ravel()


def _box_rim_mask(window: LatticeWindow) -> np.ndarray:
    shape = (window.boxes_per_axis,) * window.d
    mask = np.zeros(shape, dtype=bool)
    for a in range(window.d):
        sl = [slice(None)] * window.d
        sl[a] = 0
        mask[tuple(sl)] = True
        sl[a] = shape[a] - 1
        mask[tuple(sl)] = True
    return mask.ravel()


def substantial_set(cluster_root: int, config: Configuration,
                    labeling: ClusterLabeling | None = None,
                    classifier: BoxClassifier | None = None,
                    enforce_margin: bool = True) -> SubstantialSet:
    """C(N) and its internal boundary for the cluster with the given root.

    enforce_margin=False skips the rim check (for whole-window clusters whose
    complement is empty, where the boundary is vacuously empty).
    """
    lab = labeling or clusters(config)
    cl = classifier or BoxClassifier(config, lab)
    w = config.window
    label = lab.label_of_root(cluster_root)
    lo = lab.coord_lo[label]
    hi = lab.coord_hi[label]
    h, N, R = w.half_width, w.N, w.R
    b_lo = np.maximum(np.ceil((lo - h) / N).astype(np.int64), -R)
    b_hi = np.minimum(np.floor((hi + h) / N).astype(np.int64), R)
    members = []
    for b in np.ndindex(*(b_hi - b_lo + 1)):
        box = b_lo + np.array(b, dtype=np.int64)
        flat = w.box_flat(box)
        if cluster_root in cl.substantial_roots(flat):
            members.append(flat)
    boxes = np.array(sorted(members), dtype=np.int64)
    in_set = np.zeros(w.n_boxes, dtype=bool)
    in_set[boxes] = True
    rim = _box_rim_mask(w)
    if enforce_margin and np.any(in_set & rim):
        raise MarginViolation("substantial set reaches the box rim")
    shape = (w.boxes_per_axis,) * w.d
    free = ~in_set.reshape(shape)
    seed = free & rim.reshape(shape)
    structure = ndimage.generate_binary_structure(w.d, 1)
    outside = ndimage.binary_propagation(seed, mask=free, structure=structure).ravel()
    boundary_mask = in_set & _axis_adjacent_to(outside, w)
    return SubstantialSet(w, cluster_root, boxes, np.flatnonzero(boundary_mask))


def _diagonally_connected(flat_ids: np.ndarray, window: LatticeWindow) -> bool:
    """Connectivity of a box set in the diagonal (3^d - 1 neighbor) box graph."""
    if flat_ids.size <= 1:
        return True
    coords = {tuple(c) for c in window.box_coords(flat_ids)}
    start = next(iter(coords))
    stack = [start]
    seen = {start}
    dirs = [tuple(v) for v in window.box_directions]
    while stack:
        cur = stack.pop()
        for dv in dirs:
            nb = tuple(c + o for c, o in zip(cur, dv))
            if nb in coords and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(coords)


def boundary_diagonally_connected(cluster_root: int, config: Configuration,
                                  labeling: ClusterLabeling | None = None,
                                  classifier: BoxClassifier | None = None) -> bool:
    """Whether the internal boundary of C(N) is connected with diagonals added.

    Expected to hold for every finite cluster; run as a property check.
    Vacuously true when the boundary is empty.
    """
    ss = substantial_set(cluster_root, config, labeling, classifier)
    return _diagonally_connected(ss.boundary, config.window)


def check_star(good_component_boxes, config: Configuration,
               labeling: ClusterLabeling | None = None,
               classifier: BoxClassifier | None = None) -> bool:
    """Unique substantial cluster on a diagonally-connected component of good boxes.

    True iff exactly one cluster is substantial in at least one box of the
    component and that cluster is substantial in every box of it.
    """
    lab = labeling or clusters(config)
    cl = classifier or BoxClassifier(config, lab)
    w = config.window
    flats = [w.box_flat(b) if np.ndim(b) > 0 else int(b) for b in good_component_boxes]
    root_sets = []
    for flat in flats:
        if not cl.is_good(flat):
            raise ValueError(f"component contains a bad box: {tuple(w.box_coords(flat)[0])}")
        root_sets.append(cl.substantial_roots(flat))
    union = frozenset().union(*root_sets) if root_sets else frozenset()
    if len(union) != 1:
        return False
    common = next(iter(union))
    return all(common in rs for rs in root_sets)


@dataclass
class GoodProbabilityEstimate:
    p: float
    N: int
    window: dict
    n_samples: int
    n_good: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int
    exact_feasible: bool
    exact_value: float | None


def good_probability(p: float, N: int, window: LatticeWindow, n_samples: int,
                     seed: int = 0, workers: int = 1) -> GoodProbabilityEstimate:
    """Monte Carlo estimate of Pr(central box good) with a Wilson interval.

    The good event depends only on the edges inside the central box; it is a
    polynomial in p, evaluated exactly by exhaustion when the box has at most
    25 edges (never the case for N >= 5, so reported as a feasibility flag).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if window.N != N:
        raise ValueError("window scale differs from requested N")
    center = window.box_flat(np.zeros(window.d, dtype=np.int64))
    if not window.box_interior(np.zeros(window.d, dtype=np.int64)):
        raise MarginViolation("central box has diagonal neighbors outside the window")

    def run_chunk(lo, hi):
        good = 0
        for i in range(lo, hi):
            config = sample(window, p, seed, i)
            if BoxClassifier(config).is_good(center):
                good += 1
        return good

    n_good = sum(chunked_map(run_chunk, n_samples, workers))
    est = n_good / n_samples
    lo_ci, hi_ci = wilson_interval(n_good, n_samples)
    exact_feasible = window.edges_per_box <= 25
    return GoodProbabilityEstimate(
        p=float(p), N=int(N), window=window.spec(), n_samples=int(n_samples),
        n_good=int(n_good), estimate=est, ci_low=lo_ci, ci_high=hi_ci,
        seed=int(seed), exact_feasible=exact_feasible, exact_value=None,
    )


def classification_table(config: Configuration, classifier: BoxClassifier | None = None):
    """Rows (box coords..., status, code) for every interior box; CSV-ready."""
    cl = classifier or BoxClassifier(config)
    w = config.window
    rows = []
    for flat in range(w.n_boxes):
        coords = w.box_coords(flat)[0]
        if not w.box_interior(coords):
            continue
        st = cl.status(flat)
        rows.append(tuple(int(c) for c in coords) + (GOOD if st.good else BAD, st.code))
    return rows
