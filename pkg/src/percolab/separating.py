"""Separating components: bad-box shells around the origin, their occurrence
predicate, the closed minimal edge cut they contain, and tail experiments.

A separating component is a diagonally-connected set S of bad boxes such that
the origin lies inside S or in a finite component of the diagonal box graph
minus S.  S occurs when (i) every box of S is bad, (ii) every box of its
diagonal vertex boundary is good, and (iii') under the canonical open
extension (the configuration kept on S and its boundary, open everywhere
else) the origin cluster is finite with its substantial-set boundary inside
S.  Condition (iii') is the decidable form of the existential witness
condition: the open extension is itself a witness whenever it passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InsufficientData, InvariantViolation, MarginViolation
from .lattice import LatticeWindow
from .percolation import (
    ClusterLabeling,
    Configuration,
    clusters,
    minimal_edge_cut,
    origin_cluster_bfs,
    sample,
    touching_edge_count,
)
from .renorm import BoxClassifier, substantial_set
from .stats import TailFit, exponential_tail_fit, survival_counts
from .util import chunked_map

CUT_SIZE = "cut_size"
TOUCHING = "touching"
RENORM_BOUNDARY = "renorm_boundary"
STATISTICS = (CUT_SIZE, TOUCHING, RENORM_BOUNDARY)


@dataclass
class SeparatingComponent:
    """A diagonally-connected bad-box set enclosing the origin."""

    window: LatticeWindow
    boxes: np.ndarray          # sorted flat box ids
    boundary: np.ndarray       # sorted flat ids of the diagonal vertex boundary
    surrounds_origin: bool

    @property
    def size(self) -> int:
        return int(self.boxes.size)

    def box_set(self) -> frozenset:
        return frozenset(int(b) for b in self.boxes)


@dataclass
class CutResult:
    """Closed minimal edge cut extracted from an occurring separating component."""

    cut_edges: np.ndarray      # canonical edge ids, sorted
    inner_vertices: np.ndarray  # origin cluster of the open extension
    witness: str = "canonical_open_extension"


def _box_neighbor_flats(window: LatticeWindow, flat: int):
    """Diagonal neighbors as flat ids; None marks neighbors outside the radius."""
    coords = window.box_coords(flat)[0]
    out = []
    for dv in window.box_directions:
        nb = coords + dv
        if np.all(np.abs(nb) <= window.R):
            out.append(int((nb + window.R) @ window.box_strides))
        else:
            out.append(None)
    return out


def _flood_bad_component(classifier: BoxClassifier, seeds) -> np.ndarray:
    """Maximal diagonally-connected bad component containing the seed boxes.

    Raises MarginViolation as soon as the component would need a box outside
    the classifiable interior.  A cheap straight-line probe to the rim runs
    first: in high-bad-density configurations it certifies the violation in
    O(R) classifications instead of flooding the whole window.
    """
    w = classifier.window
    seeds = [int(s) for s in seeds]
    for s in seeds:
        if not w.box_interior(w.box_coords(s)[0]):
            raise MarginViolation("separating-component seed touches the box rim")
        if classifier.is_good(s):
            raise ValueError("seed box is good; bad component undefined")
    # rim probe along +axis0 from the first seed
    probe = w.box_coords(seeds[0])[0].copy()
    hit_rim = True
    while probe[0] < w.R - 1:
        probe[0] += 1
        if classifier.is_good(w.box_flat(probe)):
            hit_rim = False
            break
    if hit_rim:
        raise MarginViolation("bad component reaches the window box rim")
    member = set(seeds)
    stack = list(seeds)
    while stack:
        cur = stack.pop()
        for nb in _box_neighbor_flats(w, cur):
            if nb is None:
                continue
            if nb in member:
                continue
            if not w.box_interior(w.box_coords(nb)[0]):
                # boxes at |b| = R are unclassifiable
                raise MarginViolation("bad component reaches the window box rim")
            if not classifier.is_good(nb):
                member.add(nb)
                stack.append(nb)
    return np.array(sorted(member), dtype=np.int64)


def _flood_bad_interior(classifier: BoxClassifier, seed: int):
    """Bad component of the seed within the classifiable interior, no abort.

    Returns (boxes, clipped): clipped is True when the component has a member
    on the outermost interior layer, so its true extent and boundary are not
    determinable inside the window.
    """
    w = classifier.window
    member = {int(seed)}
    stack = [int(seed)]
    clipped = False
    while stack:
        cur = stack.pop()
        for nb in _box_neighbor_flats(w, cur):
            if nb is None or nb in member:
                continue
            if not w.box_interior(w.box_coords(nb)[0]):
                clipped = True
                continue
            if not classifier.is_good(nb):
                member.add(nb)
                stack.append(nb)
    return np.array(sorted(member), dtype=np.int64), clipped


def _diagonal_boundary(window: LatticeWindow, boxes: np.ndarray) -> np.ndarray:
    member = set(int(b) for b in boxes)
    out = set()
    for b in member:
        for nb in _box_neighbor_flats(window, b):
            if nb is None:
                raise MarginViolation("component boundary leaves the window")
            if nb not in member:
                out.add(nb)
    return np.array(sorted(out), dtype=np.int64)


def _surrounds_origin(window: LatticeWindow, boxes: np.ndarray) -> bool:
    """Origin inside S, or in a diagonal-complement component avoiding the box rim."""
    w = window
    center = w.box_flat(np.zeros(w.d, dtype=np.int64))
    in_s = np.zeros(w.n_boxes, dtype=bool)
    in_s[boxes] = True
    if in_s[center]:
        return True
    shape = (w.boxes_per_axis,) * w.d
    free = ~in_s.reshape(shape)
    seed = np.zeros(shape, dtype=bool)
    seed.ravel()[center] = True
    structure = ndimage.generate_binary_structure(w.d, w.d)  # full diagonal adjacency
    comp = ndimage.binary_propagation(seed, mask=free, structure=structure).ravel()
    rim = np.zeros(shape, dtype=bool)
    for a in range(w.d):
        sl = [slice(None)] * w.d
        sl[a] = 0
        rim[tuple(sl)] = True
        sl[a] = shape[a] - 1
        rim[tuple(sl)] = True
    return not bool(np.any(comp & rim.ravel()))


def build_separating_component(
    config: Configuration,
    labeling: ClusterLabeling | None = None,
    classifier: BoxClassifier | None = None,
) -> SeparatingComponent | None:
    """The maximal bad component containing the origin cluster's substantial boundary.

    Returns None when the origin cluster is infinite (rim-touching) or has L1
    diameter below N/5, the cases the occurrence expansion handles separately.
    Raises MarginViolation when the component would leave the classifiable
    interior of the window.
    """
    lab = labeling if labeling is not None else clusters(config)
    cl = classifier if classifier is not None else BoxClassifier(config, lab)
    w = config.window
    o_label = lab.origin_label
    if lab.touches[o_label]:
        return None
    if 5 * lab.diameter(o_label) < w.N:
        return None
    ss = substantial_set(int(lab.root[o_label]), config, lab, cl)
    if ss.boundary.size == 0:
        raise InvariantViolation("finite spread-out cluster with empty substantial boundary")
    for b in ss.boundary:
        if not w.box_interior(w.box_coords(int(b))[0]):
            raise MarginViolation("substantial boundary touches the box rim")
        if cl.is_good(int(b)):
            raise InvariantViolation("good box on the substantial-set boundary")
    boxes = _flood_bad_component(cl, ss.boundary)
    boundary = _diagonal_boundary(w, boxes)
    surrounds = _surrounds_origin(w, boxes)
    if not surrounds:
        raise InvariantViolation("bad component around the origin cluster fails to enclose it")
    return SeparatingComponent(w, boxes, boundary, surrounds)


def _region_edge_mask(window: LatticeWindow, boxes: np.ndarray) -> np.ndarray:
    vmask = np.zeros(window.n_vertices, dtype=bool)
    for b in boxes:
        vmask[window.box_vertex_ids(window.box_coords(int(b))[0])] = True
    return vmask[window.edge_lower] & vmask[window.edge_upper]


def open_extension(S: SeparatingComponent, config: Configuration):
    """The canonical witness candidate: keep the configuration on the component
    and its boundary, open every other edge.  Returns (configuration, edge mask
    of the kept region)."""
    region = np.concatenate([S.boxes, S.boundary])
    edge_mask = _region_edge_mask(config.window, region)
    bits = config.open_ | ~edge_mask
    return config.replace_bits(bits), edge_mask


def _open_extension_passes(S: SeparatingComponent, config: Configuration):
    """Condition (iii'): finite origin cluster under the open extension with
    substantial boundary inside S.  Returns (bool, extension labeling or None)."""
    ext, _ = open_extension(S, config)
    lab2 = clusters(ext)
    o_label = lab2.origin_label
    if lab2.touches[o_label]:
        return False, None
    cl2 = BoxClassifier(ext, lab2)
    ss2 = substantial_set(int(lab2.root[o_label]), ext, lab2, cl2)
    inside = np.isin(ss2.boundary, S.boxes, assume_unique=True)
    return bool(inside.all()), lab2


def occurs(S: SeparatingComponent, config: Configuration,
           classifier: BoxClassifier | None = None) -> bool:
    """Occurrence predicate: bad interior, good boundary, passing open extension."""
    cl = classifier if classifier is not None else BoxClassifier(config)
    w = config.window
    for b in S.boxes:
        if not w.box_interior(w.box_coords(int(b))[0]):
            raise MarginViolation("component touches the box rim")
        if cl.is_good(int(b)):
            return False
    for b in S.boundary:
        if not w.box_interior(w.box_coords(int(b))[0]):
            raise MarginViolation("component boundary touches the box rim")
        if not cl.is_good(int(b)):
            return False
    ok, _ = _open_extension_passes(S, config)
    return ok


def extract_cut(S: SeparatingComponent, config: Configuration,
                classifier: BoxClassifier | None = None) -> CutResult:
    """Closed minimal edge cut separating the origin, inside the component region.

    Requires occurs(S, config); otherwise a precondition error is raised.
    The cut is the minimal edge cut of the origin cluster under the open
    extension; every cut edge must be closed in the original configuration
    and located in the region of S and its boundary.
    """
    cl = classifier if classifier is not None else BoxClassifier(config)
    if not occurs(S, config, cl):
        raise ValueError("component does not occur; no cut to extract")
    ext, edge_mask = open_extension(S, config)
    lab2 = clusters(ext)
    o_label = lab2.origin_label
    inner = lab2.vertices_of(o_label)
    cut = minimal_edge_cut(inner, ext)
    if config.open_[cut].any():
        raise InvariantViolation("cut contains an edge open in the original configuration")
    if not edge_mask[cut].all():
        raise InvariantViolation("cut leaves the region of the component and its boundary")
    return CutResult(cut_edges=cut, inner_vertices=inner)


def enumerate_occurring(
    config: Configuration,
    labeling: ClusterLabeling | None = None,
    classifier: BoxClassifier | None = None,
) -> list[SeparatingComponent]:
    """All occurring separating components of one configuration.

    Any component enclosing the origin meets every path from the central box
    to the rim, in particular the +axis0 ray, so scanning the ray's bad boxes
    through the classifiable interior finds every candidate.  A component
    clipped by the rim is discarded when its observable part does not enclose
    the origin (junk far from the center); when it does enclose it, its
    occurrence is genuinely indeterminate and the sample is flagged with
    MarginViolation.  The returned list is pairwise box-disjoint and ordered
    by first box id.
    """
    cl = classifier if classifier is not None else BoxClassifier(config, labeling)
    w = config.window
    found: list[SeparatingComponent] = []
    seen = set()
    for k in range(0, w.R):
        coords = np.zeros(w.d, dtype=np.int64)
        coords[0] = k
        flat = w.box_flat(coords)
        if flat in seen:
            continue
        if cl.is_good(flat):
            continue
        if k == 0:
            # fast certificate in bad-dense configurations: an all-bad ray
            # from the central box to the rim means its component contains
            # the origin and is rim-clipped, so occurrence is undecidable
            probe = coords.copy()
            while probe[0] < w.R - 1:
                probe[0] += 1
                if cl.is_good(w.box_flat(probe)):
                    break
            else:
                raise MarginViolation(
                    "rim-clipped bad component encloses the origin; occurrence undecidable"
                )
        boxes, clipped = _flood_bad_interior(cl, flat)
        seen.update(int(b) for b in boxes)
        if clipped:
            if _surrounds_origin(w, boxes):
                raise MarginViolation(
                    "rim-clipped bad component encloses the origin; occurrence undecidable"
                )
            continue
        if not _surrounds_origin(w, boxes):
            continue
        boundary = _diagonal_boundary(w, boxes)
        cand = SeparatingComponent(w, boxes, boundary, True)
        if all(cl.is_good(int(b)) for b in boundary) and _open_extension_passes(cand, config)[0]:
            found.append(cand)
    found.sort(key=lambda s: int(s.boxes[0]))
    return found


# ---------------------------------------------------------------------- #
# tail experiments


@dataclass
class TailEstimate:
    """Empirical survival of a tail statistic over finite-origin samples."""

    statistic: str
    p: float
    N: int
    window: dict
    n_samples: int
    n_finite: int
    n_applicable: int
    n_excluded_margin: int
    seed: int
    counts: np.ndarray = field(repr=False)      # counts[v] = #samples with value v
    fit: TailFit | None = None

    def survival(self) -> np.ndarray:
        surv = self.counts[::-1].cumsum()[::-1]
        return surv / max(1, self.n_applicable)

    def csv_rows(self):
        surv = self.survival()
        rows = []
        for n in range(self.counts.size):
            rows.append((n, int(self.counts[n]), float(surv[n])))
        return rows

    def summary(self) -> dict:
        out = {
            "statistic": self.statistic,
            "p": self.p,
            "N": self.N,
            "window": self.window,
            "n_samples": self.n_samples,
            "n_finite": self.n_finite,
            "n_applicable": self.n_applicable,
            "n_excluded_margin": self.n_excluded_margin,
            "seed": self.seed,
        }
        if self.fit is not None:
            out["fit"] = {
                "t_hat": self.fit.t_hat,
                "t_se": self.fit.t_se,
                "r2": self.fit.r2,
                "n_lo": self.fit.n_lo,
                "n_hi": self.fit.n_hi,
                "n_points": self.fit.n_points,
            }
        return out


def _sample_tail_values(config: Configuration, statistics) -> tuple[dict, bool, bool]:
    """Per-sample tail statistics; returns (values, finite, margin_excluded)."""
    if origin_cluster_bfs(config) is None:
        return {}, False, False
    lab = clusters(config)
    o_label = lab.origin_label
    values: dict = {}
    if TOUCHING in statistics and lab.infinite_label >= 0:
        values[TOUCHING] = touching_edge_count(config, lab)
    wants_boxes = (CUT_SIZE in statistics) or (RENORM_BOUNDARY in statistics)
    if wants_boxes and 5 * lab.diameter(o_label) >= config.window.N:
        cl = BoxClassifier(config, lab)
        try:
            if RENORM_BOUNDARY in statistics:
                ss = substantial_set(int(lab.root[o_label]), config, lab, cl)
                values[RENORM_BOUNDARY] = int(ss.boundary.size)
            if CUT_SIZE in statistics:
                S = build_separating_component(config, lab, cl)
                if S is not None:
                    values[CUT_SIZE] = int(extract_cut(S, config, cl).cut_edges.size)
        except MarginViolation:
            return values, True, True
    return values, True, False


def tail_experiments(
    p: float,
    N: int,
    window: LatticeWindow,
    n_samples: int,
    seed: int = 0,
    statistics=STATISTICS,
    min_count: int = 20,
    fit_ranges: dict | None = None,
    workers: int = 1,
) -> dict:
    """Shared sweep estimating several tail statistics from one sample stream."""
    if n_samples < 10_000:
        raise ValueError("tail experiments need n_samples >= 10^4")
    if window.N != N:
        raise ValueError("window scale differs from requested N")
    for st in statistics:
        if st not in STATISTICS:
            raise ValueError(f"unknown statistic {st!r}")

    def run_chunk(lo, hi):
        vals = {st: [] for st in statistics}
        finite = 0
        excluded = 0
        for i in range(lo, hi):
            config = sample(window, p, seed, i)
            v, fin, exc = _sample_tail_values(config, statistics)
            finite += fin
            excluded += exc
            for st, x in v.items():
                vals[st].append(x)
        return vals, finite, excluded

    chunks = chunked_map(run_chunk, n_samples, workers)
    per_stat = {st: [] for st in statistics}
    n_finite = 0
    n_excluded = 0
    for vals, fin, exc in chunks:
        n_finite += fin
        n_excluded += exc
        for st in statistics:
            per_stat[st].extend(vals[st])
    if n_finite < 100:
        raise InsufficientData(
            f"only {n_finite} samples with a finite origin cluster (need >= 100)"
        )
    out = {}
    for st in statistics:
        values = np.array(per_stat[st], dtype=np.int64)
        counts = (
            survival_counts(values)[0] if values.size else np.zeros(1, dtype=np.int64)
        )
        fit = None
        if values.size:
            rng = (fit_ranges or {}).get(st, (None, None))
            try:
                fit = exponential_tail_fit(values, min_count=min_count,
                                           n_min=rng[0], n_max=rng[1])
            except InsufficientData:
                fit = None
        out[st] = TailEstimate(
            statistic=st, p=float(p), N=int(N), window=window.spec(),
            n_samples=int(n_samples), n_finite=int(n_finite),
            n_applicable=int(values.size), n_excluded_margin=int(n_excluded),
            seed=int(seed), counts=counts, fit=fit,
        )
    return out


def tail_experiment(p, N, window, n_samples, seed, statistic,
                    min_count: int = 20, fit_range=None, workers: int = 1) -> TailEstimate:
    """Survival and exponential-rate fit of one tail statistic."""
    ranges = {statistic: fit_range} if fit_range is not None else None
    return tail_experiments(
        p, N, window, n_samples, seed, statistics=(statistic,),
        min_count=min_count, fit_ranges=ranges, workers=workers,
    )[statistic]
