"""Monte Carlo estimators for the macroscopic cluster functions: percolation
density, k-point connection probabilities and their finite-cluster
truncations, finite-cluster moments, the mean reciprocal cluster size, its
derivative identity, and the decay of the truncated two-point function.

All sweeps are counter-based and chunk-deterministic: reruns with the same
seed give byte-identical reports at any worker count.  Rim-touching clusters
are the finite-volume stand-in for infinite ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InsufficientData
from .lattice import LatticeWindow
from .percolation import _uniforms
from .stats import mean_ci, weighted_line_fit, wilson_interval
from .util import chunked_map

# Supercritical-threshold surrogates: d=2 exactly 1/2; d=3 frozen from
# calibrate_pc_surrogate(3, sizes=(12, 20, 32), n_samples=400, seed=7).
P_C_SURROGATE = {2: 0.5, 3: 0.2488}


@dataclass
class EstimatorReport:
    quantity: str
    p: float
    window: dict
    n_samples: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int
    exclusions: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


# ---------------------------------------------------------------------- #
# batched labeling sweeps


def _batched_target_stats(window: LatticeWindow, open_matrix: np.ndarray, targets: np.ndarray):
    """Component labels, sizes and rim flags at target vertices for a batch.

    open_matrix: (B, n_edges) bool.  Returns (labels, sizes, touch) each of
    shape (B, len(targets)); labels are only comparable within a row.
    """
    B = open_matrix.shape[0]
    V = window.n_vertices
    pos = np.flatnonzero(open_matrix.ravel())
    samp = pos // window.n_edges
    eid = pos % window.n_edges
    offs = samp.astype(np.int64) * V
    rows = window.edge_lower[eid] + offs
    cols = window.edge_upper[eid] + offs
    graph = coo_matrix(
        (np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(B * V, B * V)
    )
    _, lab = connected_components(graph, directed=False)
    size_of = np.bincount(lab)
    touch_of = np.zeros(size_of.size, dtype=bool)
    rim = (np.arange(B, dtype=np.int64)[:, None] * V) + window.rim_indices[None, :]
    touch_of[lab[rim.ravel()]] = True
    tgt = (np.arange(B, dtype=np.int64)[:, None] * V) + targets[None, :]
    tl = lab[tgt.ravel()].reshape(B, targets.size)
    return tl, size_of[tl], touch_of[tl]


def _target_sweep(window: LatticeWindow, ps, n_samples: int, seed: int,
                  targets: np.ndarray, workers: int = 1, batch: int | None = None):
    """Per-sample target stats at one or several coupled parameters.

    ps: list of thresholds sharing each sample's uniforms (common random
    numbers).  Returns {p: (labels, sizes, touch)} with arrays of shape
    (n_samples, len(targets)).
    """
    ps = [float(p) for p in ps]
    V = window.n_vertices
    if batch is None:
        batch = max(1, min(256, 4_000_000 // max(V, 1)))

    def run_chunk(lo, hi):
        out = {p: [] for p in ps}
        for blo in range(lo, hi, batch):
            bhi = min(blo + batch, hi)
            u = np.empty((bhi - blo, window.n_edges))
            for j, i in enumerate(range(blo, bhi)):
                u[j] = _uniforms(window, seed, i)
            for p in ps:
                out[p].append(_batched_target_stats(window, u < p, targets))
        return out

    chunks = chunked_map(run_chunk, n_samples, workers)
    result = {}
    for p in ps:
        labs = np.concatenate([b[0] for ch in chunks for b in ch[p]])
        sizes = np.concatenate([b[1] for ch in chunks for b in ch[p]])
        touch = np.concatenate([b[2] for ch in chunks for b in ch[p]])
        result[p] = (labs, sizes, touch)
    return result


# ---------------------------------------------------------------------- #
# origin-cluster statistics


@dataclass
class OriginClusterStats:
    """Per-sample origin cluster size and rim flag; basis for the estimators.

    The size histogram, the rim fraction and the moments all come from the
    same classification of each sample, so the normalization identities hold
    exactly: theta + sum_n P_n = 1 and chi^f_1 = sum_n n * P_n.
    """

    p: float
    window: dict
    n_samples: int
    seed: int
    sizes: np.ndarray = field(repr=False)
    touch: np.ndarray = field(repr=False)

    @property
    def theta(self) -> float:
        return float(self.touch.mean())

    def histogram(self) -> dict:
        """P_n estimates over finite-cluster samples: {n: fraction}."""
        fin = self.sizes[~self.touch]
        if fin.size == 0:
            return {}
        counts = np.bincount(fin)
        return {int(n): counts[n] / self.n_samples for n in np.flatnonzero(counts)}

    def chi_f(self, k: int) -> float:
        return float(np.where(self.touch, 0.0, self.sizes.astype(np.float64) ** k).mean())

    def kappa(self) -> float:
        return float((1.0 / self.sizes).mean())


def origin_cluster_statistics(p: float, window: LatticeWindow, n_samples: int,
                              seed: int = 0, workers: int = 1) -> OriginClusterStats:
    targets = np.array([window.origin_index], dtype=np.int64)
    _, sizes, touch = _target_sweep(window, [p], n_samples, seed, targets, workers)[p]
    return OriginClusterStats(
        p=float(p), window=window.spec(), n_samples=int(n_samples), seed=int(seed),
        sizes=sizes[:, 0].astype(np.int64), touch=touch[:, 0],
    )


def theta_hat(p: float, window: LatticeWindow, n_samples: int, seed: int = 0,
              workers: int = 1) -> EstimatorReport:
    """Fraction of samples whose origin cluster reaches the window rim."""
    stats = origin_cluster_statistics(p, window, n_samples, seed, workers)
    k = int(stats.touch.sum())
    lo, hi = wilson_interval(k, n_samples)
    return EstimatorReport(
        quantity="theta", p=float(p), window=window.spec(), n_samples=int(n_samples),
        estimate=k / n_samples, ci_low=lo, ci_high=hi, seed=int(seed),
    )


def chi_f_hat(k: int, p: float, window: LatticeWindow, n_samples: int,
              seed: int = 0, workers: int = 1) -> EstimatorReport:
    """k-th moment of the origin cluster size over finite-cluster samples."""
    if k < 1:
        raise ValueError("moment order k must be >= 1")
    stats = origin_cluster_statistics(p, window, n_samples, seed, workers)
    vals = np.where(stats.touch, 0.0, stats.sizes.astype(np.float64) ** k)
    m, lo, hi, _ = mean_ci(vals)
    return EstimatorReport(
        quantity=f"chi_f_{k}", p=float(p), window=window.spec(),
        n_samples=int(n_samples), estimate=m, ci_low=lo, ci_high=hi, seed=int(seed),
    )


def kappa_hat(p: float, window: LatticeWindow, n_samples: int, seed: int = 0,
              workers: int = 1) -> EstimatorReport:
    """Mean reciprocal origin-cluster size.

    Rim-touching clusters contribute through their truncated size; the bias
    vanishes with window growth and is controlled by window sweeps.  At p = 1
    the infinite-volume value is 0 and is attached as a note.
    """
    stats = origin_cluster_statistics(p, window, n_samples, seed, workers)
    m, lo, hi, _ = mean_ci(1.0 / stats.sizes)
    extra = {}
    if p == 1.0:
        extra["infinite_volume_value"] = 0.0
    return EstimatorReport(
        quantity="kappa", p=float(p), window=window.spec(), n_samples=int(n_samples),
        estimate=m, ci_low=lo, ci_high=hi, seed=int(seed), extra=extra,
    )


# ---------------------------------------------------------------------- #
# k-point functions


def _tuple_targets(window: LatticeWindow, xs) -> np.ndarray:
    coords = np.asarray(xs, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[None, :]
    flats = window.vertex_index(coords)
    if np.any(window.rim_mask[flats]):
        raise ValueError("tuple vertices must lie in the window interior")
    return flats


def tau_hat(xs, p: float, window: LatticeWindow, n_samples: int, seed: int = 0,
            truncated: bool = False, workers: int = 1) -> EstimatorReport:
    """Probability that all tuple vertices share one cluster.

    truncated: additionally require that the shared cluster avoids the rim
    (the finite-cluster version).
    """
    targets = _tuple_targets(window, xs)
    labs, _, touch = _target_sweep(window, [p], n_samples, seed, targets, workers)[p]
    connected = np.all(labs == labs[:, :1], axis=1)
    if truncated:
        connected &= ~touch[:, 0]
    k = int(connected.sum())
    lo, hi = wilson_interval(k, n_samples)
    return EstimatorReport(
        quantity="tau_f" if truncated else "tau", p=float(p), window=window.spec(),
        n_samples=int(n_samples), estimate=k / n_samples, ci_low=lo, ci_high=hi,
        seed=int(seed), extra={"tuple": [list(map(int, x)) for x in np.atleast_2d(np.asarray(xs))]},
    )


def tau_f_ball_sum(p: float, window: LatticeWindow, r_max: int, n_samples: int,
                   seed: int = 0, workers: int = 1):
    """Sum of the finite-cluster pair function over an L-infinity ball.

    Estimates sum over |x|_inf <= r_max of the probability that x shares a
    finite cluster with the origin; per sample this is the count of ball
    vertices inside a finite origin cluster, so the mean and its standard
    error come from one sweep.  Returns (estimate, se).
    """
    w = window
    rng = np.arange(-r_max, r_max + 1)
    coords = np.stack(np.meshgrid(*[rng] * w.d, indexing="ij"), axis=-1).reshape(-1, w.d)
    targets = _tuple_targets(w, coords)
    labs, _, touch = _target_sweep(w, [p], n_samples, seed, targets, workers)[p]
    o_col = int(np.flatnonzero((coords == 0).all(axis=1))[0])
    finite_o = ~touch[:, o_col]
    counts = ((labs == labs[:, o_col:o_col + 1]).sum(axis=1)) * finite_o
    m, _, _, se = mean_ci(counts.astype(np.float64))
    return m, se


@dataclass
class TauFDecayReport:
    p: float
    window: dict
    direction: list
    n_samples: int
    seed: int
    distances: list
    estimates: list
    ci_low: list
    ci_high: list
    successes: list
    c2_hat: float | None
    c2_se: float | None
    fitted_range: tuple | None


def tau_f_decay(p: float, window: LatticeWindow, direction, max_dist: int,
                n_samples: int, seed: int = 0, min_successes: int = 20,
                workers: int = 1) -> TauFDecayReport:
    """Finite-cluster two-point function along a ray, with exponential fit.

    Distance 0 reports the probability that the origin cluster is finite
    (the definitional consistency row).  The rate is fitted by weighted LS on
    log estimates over distances with at least min_successes hits.
    """
    if p <= P_C_SURROGATE[window.d]:
        raise ValueError("tau_f decay experiment needs a supercritical p")
    dvec = np.asarray(direction, dtype=np.int64)
    if dvec.shape != (window.d,) or not np.any(dvec):
        raise ValueError("direction must be a nonzero lattice vector")
    coords = [np.zeros(window.d, dtype=np.int64)] + [r * dvec for r in range(1, max_dist + 1)]
    targets = _tuple_targets(window, np.stack(coords))
    labs, _, touch = _target_sweep(window, [p], n_samples, seed, targets, workers)[p]
    finite_o = ~touch[:, 0]
    ests, los, his, succ = [], [], [], []
    for r in range(0, max_dist + 1):
        hit = finite_o & (labs[:, r] == labs[:, 0])
        k = int(hit.sum())
        lo, hi = wilson_interval(k, n_samples)
        ests.append(k / n_samples)
        los.append(lo)
        his.append(hi)
        succ.append(k)
    rs = np.arange(1, max_dist + 1)
    usable = np.array([succ[r] >= min_successes for r in rs])
    c2 = c2_se = None
    fitted = None
    if usable.sum() >= 2:
        rr = rs[usable]
        logs = np.log(np.array([ests[r] for r in rr]))
        slope, _, slope_se, _ = weighted_line_fit(rr, logs, w=np.array([succ[r] for r in rr]))
        c2, c2_se = -slope, slope_se
        fitted = (int(rr.min()), int(rr.max()))
    else:
        raise InsufficientData("too few distances with enough connection events")
    return TauFDecayReport(
        p=float(p), window=window.spec(), direction=[int(v) for v in dvec],
        n_samples=int(n_samples), seed=int(seed),
        distances=list(range(0, max_dist + 1)), estimates=ests,
        ci_low=los, ci_high=his, successes=succ,
        c2_hat=c2, c2_se=c2_se, fitted_range=fitted,
    )


# ---------------------------------------------------------------------- #
# derivative identity for the mean reciprocal cluster size


@dataclass
class KappaDerivativeReport:
    p: float
    h: float
    window: dict
    n_samples: int
    seed: int
    central_difference: float
    central_se: float
    f_hat: float
    f_se: float
    discrepancy: float          # central difference minus (-f_hat)
    discrepancy_se: float
    se_units: float


def kappa_derivative_check(p: float, h: float, window: LatticeWindow,
                           n_samples: int, seed: int = 0,
                           workers: int = 1) -> KappaDerivativeReport:
    """Central difference of the mean reciprocal cluster size against the
    neighbor-connection formula -(1/(2(1-p))) * sum_{x ~ o} (1 - tau_{o,x}).

    Common random numbers couple the p-h and p+h configurations, which makes
    the paired difference low-variance.  The discrepancy is reported in
    combined standard errors.
    """
    if h < 0.01:
        raise ValueError("h too small for Monte Carlo resolution (need h >= 0.01)")
    pc = P_C_SURROGATE[window.d]
    if not (pc < p - h and p + h < 1.0):
        raise ValueError("need p - h > p_c surrogate and p + h < 1")
    o = window.origin_index
    neigh = []
    for a in range(window.d):
        for s in (-1, 1):
            v = np.zeros(window.d, dtype=np.int64)
            v[a] = s
            neigh.append(v)
    targets = _tuple_targets(window, np.stack([np.zeros(window.d, dtype=np.int64)] + neigh))
    res = _target_sweep(window, [p - h, p, p + h], n_samples, seed, targets, workers)
    _, sz_lo, _ = res[p - h]
    labs_mid, _, _ = res[p]
    _, sz_hi, _ = res[p + h]
    delta = 1.0 / sz_hi[:, 0] - 1.0 / sz_lo[:, 0]
    central, _, _, central_se_raw = mean_ci(delta)
    central /= 2 * h
    central_se = central_se_raw / (2 * h)
    disconnected = labs_mid[:, 1:] != labs_mid[:, :1]
    f_per_sample = disconnected.sum(axis=1) / (2.0 * (1.0 - p))
    f_hat, _, _, f_se = mean_ci(f_per_sample)
    disc = central + f_hat
    disc_se = math.sqrt(central_se ** 2 + f_se ** 2)
    return KappaDerivativeReport(
        p=float(p), h=float(h), window=window.spec(), n_samples=int(n_samples),
        seed=int(seed), central_difference=float(central), central_se=float(central_se),
        f_hat=float(f_hat), f_se=float(f_se), discrepancy=float(disc),
        discrepancy_se=float(disc_se),
        se_units=float(abs(disc) / disc_se) if disc_se > 0 else 0.0,
    )


# ---------------------------------------------------------------------- #
# threshold surrogate calibration


def calibrate_pc_surrogate(d: int, sizes=(12, 20, 32), p_grid=None,
                           n_samples: int = 400, seed: int = 7) -> dict:
    """Crossing-probability midpoint on growing cubes: the supercritical
    threshold surrogate used to validate estimator parameters.

    Returns per-size midpoints and the frozen surrogate (largest size).
    """
    if p_grid is None:
        p_grid = np.round(np.arange(0.16, 0.40, 0.02), 3) if d == 3 else \
            np.round(np.arange(0.40, 0.62, 0.02), 3)
    midpoints = {}
    for L in sizes:
        probs = []
        for p in p_grid:
            hits = 0
            for i in range(n_samples):
                hits += _cube_crosses(d, L, float(p), seed, i)
            probs.append(hits / n_samples)
        mono = np.maximum.accumulate(probs)
        target = np.clip(0.5, mono.min(), mono.max())
        midpoints[L] = float(np.interp(target, mono, p_grid))
    return {"d": d, "midpoints": midpoints, "surrogate": midpoints[max(sizes)]}


def _cube_grid(d: int, L: int):
    n = L ** d
    strides = np.array([L ** (d - 1 - a) for a in range(d)], dtype=np.int64)
    ar = np.arange(n, dtype=np.int64)
    lows, axes = [], []
    for a in range(d):
        coord = (ar // strides[a]) % L
        keep = np.flatnonzero(coord < L - 1)
        lows.append(keep)
        axes.append(np.full(keep.size, a, dtype=np.int8))
    lower = np.concatenate(lows)
    upper = lower + strides[np.concatenate(axes)]
    left = np.flatnonzero((ar // strides[0]) % L == 0)
    right = np.flatnonzero((ar // strides[0]) % L == L - 1)
    return n, lower, upper, left, right


def _cube_crosses(d: int, L: int, p: float, seed: int, index: int) -> bool:
    n, lower, upper, left, right = _cube_grid(d, L)
    key = np.array([seed ^ (L << 32), index], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    open_ = gen.random(lower.size) < p
    keep = np.flatnonzero(open_)
    graph = coo_matrix(
        (np.ones(keep.size, dtype=np.int8), (lower[keep], upper[keep])), shape=(n, n)
    )
    _, lab = connected_components(graph, directed=False)
    return bool(np.isin(lab[left], lab[right]).any())
