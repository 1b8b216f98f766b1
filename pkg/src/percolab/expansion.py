"""Signed p^m (1-p)^b polynomials, complex disk bounds, decay checks, and the
per-configuration / empirical inclusion-exclusion identity over separating
components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InsufficientData, InvariantViolation, MarginViolation
from .lattice import LatticeWindow
from .percolation import ClusterLabeling, Configuration, clusters, sample
from .renorm import BoxClassifier
from .separating import _region_edge_mask, enumerate_occurring
from .stats import Z95_ONE_SIDED, weighted_line_fit
from .util import chunked_map

_LOG_EXACT_LIMIT = 64


class ExponentPolynomial:
    """Signed sum of terms coeff * z^m * (1-z)^b with integer coefficients.

    Terms are canonicalized: merged by (m, b) with signs folded into the
    coefficient, zero coefficients dropped.
    """

    def __init__(self, terms=()):
        acc: dict = {}
        for coeff, m, b in terms:
            if m < 0 or b < 0:
                raise ValueError("exponents must be nonnegative")
            key = (int(m), int(b))
            acc[key] = acc.get(key, 0) + int(coeff)
        self._terms = {k: v for k, v in sorted(acc.items()) if v != 0}

    @property
    def terms(self):
        return [(v, m, b) for (m, b), v in self._terms.items()]

    def __eq__(self, other):
        return isinstance(other, ExponentPolynomial) and self._terms == other._terms

    def __repr__(self):
        return f"ExponentPolynomial({self.terms!r})"

    def eval(self, z) -> complex:
        """Evaluate at a complex point; log-domain for large exponents."""
        z = complex(z)
        total = 0.0 + 0.0j
        for (m, b), coeff in self._terms.items():
            total += coeff * _power_term(z, m, b)
        return total

    def eval_real(self, p: float) -> float:
        return self.eval(complex(p, 0.0)).real

    def to_json(self) -> str:
        return json.dumps([[v, m, b] for (m, b), v in self._terms.items()])

    @classmethod
    def from_json(cls, text: str) -> "ExponentPolynomial":
        return cls((v, m, b) for v, m, b in json.loads(text))


def _power_term(z: complex, m: int, b: int) -> complex:
    w = 1.0 - z
    if m + b <= _LOG_EXACT_LIMIT:
        return z ** m * w ** b
    if m > 0 and z == 0:
        return 0.0 + 0.0j
    if b > 0 and w == 0:
        return 0.0 + 0.0j
    log_term = 0.0 + 0.0j
    if m:
        log_term += m * _clog(z)
    if b:
        log_term += b * _clog(w)
    return _cexp(log_term)


def _clog(z: complex) -> complex:
    return complex(math.log(abs(z)), math.atan2(z.imag, z.real))


def _cexp(z: complex) -> complex:
    r = math.exp(min(z.real, 700.0))
    return complex(r * math.cos(z.imag), r * math.sin(z.imag))


def eval_polynomial(poly: ExponentPolynomial, z) -> complex:
    return poly.eval(z)


def exact_event_polynomial(n_edges: int, predicate) -> ExponentPolynomial:
    """Exact polynomial of an event on at most 25 edges by full enumeration.

    predicate receives a (chunk, n_edges) boolean matrix of edge assignments
    and returns a boolean vector of event membership.  The result has one
    term per open-count m: count_m * p^m * (1-p)^(n_edges - m).
    """
    if not 0 <= n_edges <= 25:
        raise ValueError("exhaustive enumeration capped at 25 edges")
    total = 1 << n_edges
    counts = np.zeros(n_edges + 1, dtype=np.int64)
    chunk = min(total, 1 << 16)
    bit_cols = np.arange(n_edges, dtype=np.uint32)
    for lo in range(0, total, chunk):
        masks = np.arange(lo, min(lo + chunk, total), dtype=np.uint32)
        bits = (masks[:, None] >> bit_cols[None, :]) & 1
        sel = np.asarray(predicate(bits.astype(bool)), dtype=bool)
        m = bits.sum(axis=1)
        counts += np.bincount(m[sel], minlength=n_edges + 1)
    return ExponentPolynomial(
        (int(counts[m]), m, n_edges - m) for m in range(n_edges + 1) if counts[m]
    )


# ---------------------------------------------------------------------- #
# complex disk bound


def disk_bound_check(m: int, b: int, p: float, delta: float, z: complex,
                     atol: float = 1e-9) -> bool:
    """|z^m (1-z)^b| <= c^b * (p+delta)^m * (1-p-delta)^b on the disk |z-p| < delta,
    with c = (1-p+delta)/(1-p-delta), for p + delta < 1.

    At p = 1 the factor moves to the open-edge exponent: |z| <= 1 + delta =
    c_delta * (1 - delta) and |1-z| <= delta give
    |z^m (1-z)^b| <= c_delta^m * (1-delta)^m * delta^b with
    c_delta = (1+delta)/(1-delta).
    """
    if m < 0 or b < 0:
        raise ValueError("exponents must be nonnegative")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    z = complex(z)
    if p == 1.0:
        if abs(z - 1.0) >= delta:
            raise ValueError("z outside the disk around 1")
        c = (1 + delta) / (1 - delta)
        c_exponent = m
        ref_m, ref_b = 1 - delta, delta
    else:
        if not 0 <= p < 1 or p + delta >= 1:
            raise ValueError("need 0 <= p < 1 with p + delta < 1")
        if abs(z - p) >= delta:
            raise ValueError("z outside the disk around p")
        c = (1 - p + delta) / (1 - p - delta)
        c_exponent = b
        ref_m, ref_b = p + delta, 1 - p - delta
    lhs = m * _safe_log(abs(z)) + b * _safe_log(abs(1 - z))
    rhs = c_exponent * math.log(c) + m * _safe_log(ref_m) + b * _safe_log(ref_b)
    return lhs <= rhs + atol


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass
class DiskSweepResult:
    checked: int
    violations: int
    p1_checked: int
    seed: int


def disk_bound_sweep(n_tuples: int, seed: int = 0, m_max: int = 200,
                     p1_fraction: float = 0.25) -> DiskSweepResult:
    """Randomized verification of the disk bound; the sweep is the test itself."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    ms = rng.integers(0, m_max + 1, size=n_tuples)
    bs = rng.integers(0, m_max + 1, size=n_tuples)
    is_p1 = rng.random(n_tuples) < p1_fraction
    deltas = rng.uniform(1e-6, 1.0, size=n_tuples)
    ps = np.where(is_p1, 1.0, rng.uniform(0.0, 1.0, size=n_tuples) * (1.0 - deltas))
    # z uniform in the open disk of radius delta around p
    radii = deltas * np.sqrt(rng.random(n_tuples)) * (1 - 1e-12)
    angles = rng.uniform(0.0, 2 * np.pi, size=n_tuples)
    zs = ps + radii * np.exp(1j * angles)
    az = np.abs(zs)
    aw = np.abs(1.0 - zs)

    def xlog(k, x):
        # k * log(x) with the convention 0 * log(0) = 0
        out = np.full(n_tuples, -np.inf)
        np.log(x, where=x > 0, out=out)
        return np.where(k == 0, 0.0, k * out)

    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = xlog(ms, az) + xlog(bs, aw)
        c = np.where(is_p1, (1 + deltas) / (1 - deltas),
                     (1 - ps + deltas) / (1 - ps - deltas))
        c_exp = np.where(is_p1, ms, bs)
        ref_m = np.where(is_p1, 1 - deltas, ps + deltas)
        ref_b = np.where(is_p1, deltas, 1 - ps - deltas)
        rhs = c_exp * np.log(c) + xlog(ms, ref_m) + xlog(bs, ref_b)
    bad = lhs > rhs + 1e-9
    return DiskSweepResult(
        checked=int(n_tuples), violations=int(bad.sum()),
        p1_checked=int(is_p1.sum()), seed=int(seed),
    )


# ---------------------------------------------------------------------- #
# geometric decay of per-size aggregates


@dataclass
class DecayCheck:
    c_hat: float
    c_upper95: float
    passes: bool
    slope: float
    slope_se: float
    n_used: int
    complexity_ok: bool | None = None


def geometric_decay_check(magnitudes, j_window=None, min_run: int = 5,
                          complexity=None) -> DecayCheck:
    """Fit log-magnitude vs n and test fitted ratio < 1 at one-sided 95%.

    magnitudes[n-1] is the aggregate magnitude at size n.  Needs at least
    min_run consecutive nonzero entries.  complexity, when given, is a tuple
    (sizes, edge_counts, lower, upper); the check also requires
    lower * n <= count <= upper * n for every recorded event.
    """
    mags = np.asarray(magnitudes, dtype=np.float64)
    ns = np.arange(1, mags.size + 1)
    if j_window is not None:
        lo, hi = j_window
        keep = (ns >= lo) & (ns <= hi)
        mags, ns = mags[keep], ns[keep]
    nz = mags > 0
    best_lo, best_len = 0, 0
    run_lo = None
    for i, flag in enumerate(np.r_[nz, False]):
        if flag and run_lo is None:
            run_lo = i
        elif not flag and run_lo is not None:
            if i - run_lo > best_len:
                best_lo, best_len = run_lo, i - run_lo
            run_lo = None
    if best_len < min_run:
        raise InsufficientData(
            f"longest nonzero run has {best_len} entries (need >= {min_run})"
        )
    ns_f = ns[best_lo:best_lo + best_len]
    logs = np.log(mags[best_lo:best_lo + best_len])
    slope, _, slope_se, _ = weighted_line_fit(ns_f, logs)
    c_hat = math.exp(slope)
    c_up = math.exp(slope + Z95_ONE_SIDED * slope_se)
    complexity_ok = None
    if complexity is not None:
        sizes, counts, lower, upper = complexity
        sizes = np.asarray(sizes, dtype=np.float64)
        counts = np.asarray(counts, dtype=np.float64)
        complexity_ok = bool(
            np.all(counts >= lower * sizes) and np.all(counts <= upper * sizes)
        )
    return DecayCheck(
        c_hat=c_hat, c_upper95=c_up, passes=bool(c_up < 1.0),
        slope=float(slope), slope_se=float(slope_se), n_used=int(best_len),
        complexity_ok=complexity_ok,
    )


# ---------------------------------------------------------------------- #
# inclusion-exclusion over separating components


def per_config_inclusion_exclusion(
    config: Configuration,
    labeling: ClusterLabeling | None = None,
    classifier: BoxClassifier | None = None,
    subset_crosscheck_limit: int = 10,
):
    """Exact indicator identity for one configuration.

    lhs = 1 iff some separating component occurs and the origin cluster has
    L1 diameter >= N/5; rhs is the signed count over nonempty subsets of the
    occurring components (1 - 0^k in closed form, cross-checked by explicit
    subset summation for small k).  Returns (lhs, rhs).
    """
    lab = labeling if labeling is not None else clusters(config)
    w = config.window
    o_label = lab.origin_label
    small = (not lab.touches[o_label]) and 5 * lab.diameter(o_label) < w.N
    if small:
        return 0, 0
    occ = enumerate_occurring(config, lab, classifier)
    k = len(occ)
    lhs = 1 if k >= 1 else 0
    rhs = 1 - 0 ** k
    if 0 < k <= subset_crosscheck_limit:
        explicit = 0
        for j in range(1, k + 1):
            for _ in combinations(range(k), j):
                explicit += (-1) ** (j + 1)
        if explicit != rhs:
            raise InvariantViolation("closed-form and explicit subset sums differ")
    return lhs, rhs


@dataclass
class SignedAggregate:
    """Per-size signed Monte Carlo estimates of the occurrence expansion."""

    p: float
    N: int
    window: dict
    n_max: int
    n_samples: int
    n_used: int
    n_excluded_margin: int
    seed: int
    a_hat: np.ndarray = field(repr=False)        # index n-1 -> estimate at size n
    a_se: np.ndarray = field(repr=False)
    total: float = 0.0
    total_se: float = 0.0
    direct: float = 0.0
    direct_se: float = 0.0
    diff_se: float = 0.0
    component_sizes: np.ndarray = field(default=None, repr=False)
    component_edge_counts: np.ndarray = field(default=None, repr=False)
    decay: DecayCheck | None = None

    def csv_rows(self):
        return [
            (n + 1, float(self.a_hat[n]), float(self.a_se[n]))
            for n in range(self.n_max)
        ]


def _central_box_edges(window: LatticeWindow) -> int:
    return window.edges_per_box


def empirical_expansion(
    p: float,
    N: int,
    window: LatticeWindow,
    n_max: int,
    n_samples: int,
    seed: int = 0,
    workers: int = 1,
    decay_min_run: int = 5,
    mutator=None,
) -> SignedAggregate:
    """Monte Carlo estimates of the signed per-size aggregates and the direct
    union-event probability, from the same sample stream.

    Per sample, every nonempty subset of the occurring components contributes
    its sign at the subset's total box count; samples where the origin cluster
    has diameter < N/5 contribute zero everywhere.  Margin-violating samples
    are excluded and counted.  mutator, when given, post-processes each
    configuration (conditioned stress ensembles); the per-configuration
    identity is measure-free, so the consistency checks remain valid.
    """
    if window.N != N:
        raise ValueError("window scale differs from requested N")

    def run_chunk(lo, hi):
        sums = np.zeros(n_max + 1, dtype=np.float64)
        sumsq = np.zeros(n_max + 1, dtype=np.float64)
        tot_sum = tot_sumsq = 0.0
        dir_sum = 0.0
        diff_sumsq = 0.0
        used = 0
        excluded = 0
        comp_sizes = []
        comp_edges = []
        for i in range(lo, hi):
            config = sample(window, p, seed, i)
            if mutator is not None:
                config = mutator(config)
            lab = clusters(config)
            o_label = lab.origin_label
            try:
                small = (not lab.touches[o_label]) and 5 * lab.diameter(o_label) < window.N
                if small:
                    occ = []
                else:
                    occ = enumerate_occurring(config, lab)
            except MarginViolation:
                excluded += 1
                continue
            used += 1
            x = np.zeros(n_max + 1, dtype=np.float64)
            direct = 0.0
            if occ and not small:
                direct = 1.0
                sizes = [s.size for s in occ]
                for s in occ:
                    comp_sizes.append(s.size)
                    region = np.concatenate([s.boxes, s.boundary])
                    comp_edges.append(
                        int(_region_edge_mask(window, region).sum())
                        + _central_box_edges(window)
                    )
                for j in range(1, len(occ) + 1):
                    for idx in combinations(range(len(occ)), j):
                        n_tot = sum(sizes[t] for t in idx)
                        if n_tot <= n_max:
                            x[n_tot] += (-1) ** (j + 1)
            sums += x
            sumsq += x * x
            xt = x.sum()
            tot_sum += xt
            tot_sumsq += xt * xt
            dir_sum += direct
            diff_sumsq += (xt - direct) ** 2
        return (sums, sumsq, tot_sum, tot_sumsq, dir_sum, diff_sumsq,
                used, excluded, comp_sizes, comp_edges)

    chunks = chunked_map(run_chunk, n_samples, workers)
    sums = np.zeros(n_max + 1)
    sumsq = np.zeros(n_max + 1)
    tot_sum = tot_sumsq = dir_sum = diff_sumsq = 0.0
    used = excluded = 0
    comp_sizes: list = []
    comp_edges: list = []
    for ch in chunks:
        sums += ch[0]
        sumsq += ch[1]
        tot_sum += ch[2]
        tot_sumsq += ch[3]
        dir_sum += ch[4]
        diff_sumsq += ch[5]
        used += ch[6]
        excluded += ch[7]
        comp_sizes.extend(ch[8])
        comp_edges.extend(ch[9])
    if used < 100:
        raise InsufficientData(f"only {used} usable samples (need >= 100)")
    mean = sums / used
    var = np.maximum(sumsq / used - mean ** 2, 0.0)
    se = np.sqrt(var / used)
    total = tot_sum / used
    total_se = math.sqrt(max(tot_sumsq / used - total ** 2, 0.0) / used)
    direct = dir_sum / used
    direct_se = math.sqrt(max(direct * (1 - direct), 0.0) / used)
    diff_se = math.sqrt(max(diff_sumsq / used - (total - direct) ** 2, 0.0) / used)
    e_box = _central_box_edges(window)
    complexity = None
    if comp_sizes:
        complexity = (
            np.array(comp_sizes), np.array(comp_edges),
            e_box / 2 ** (window.d + 1), (3 ** window.d + 1) * e_box,
        )
    decay = None
    try:
        decay = geometric_decay_check(
            np.abs(mean[1:]), min_run=decay_min_run, complexity=complexity
        )
    except InsufficientData:
        decay = None
    return SignedAggregate(
        p=float(p), N=int(N), window=window.spec(), n_max=int(n_max),
        n_samples=int(n_samples), n_used=int(used), n_excluded_margin=int(excluded),
        seed=int(seed), a_hat=mean[1:], a_se=se[1:],
        total=float(total), total_se=float(total_se),
        direct=float(direct), direct_se=float(direct_se), diff_se=float(diff_se),
        component_sizes=np.array(comp_sizes, dtype=np.int64),
        component_edge_counts=np.array(comp_edges, dtype=np.int64),
        decay=decay,
    )
