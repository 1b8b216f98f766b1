"""Per-configuration invariant suites and the independent oracles they check
against.

The structure suite runs the full separating-component pipeline on sampled
configurations and asserts the identities that must hold for every single
configuration: occurrence of the built component, closedness and containment
of the extracted cut, connectivity of the substantial boundary with diagonals
added, uniqueness of the substantial cluster on good components, pairwise
disjointness of occurring components, the touching-edge bound, and the exact
case split of the finite-cluster event.

Because the identities are per-configuration facts, the suite can also run on
a conditioned ensemble that closes a randomized rectilinear moat around the
origin: this forces a finite origin cluster in an otherwise well-connected
environment and exercises the pipeline densely where unconditioned sampling
would almost never produce an applicable sample.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .counting import count_animals, neighbor_offsets
from .errors import InvariantViolation, MarginViolation
from .lattice import LatticeWindow, box_overlap
from .percolation import (
    Configuration,
    clusters,
    cut_separates_from_rim,
    sample,
    touching_edge_count,
)
from .renorm import BoxClassifier, check_star, substantial_set
from .separating import (
    _box_neighbor_flats,
    build_separating_component,
    enumerate_occurring,
    extract_cut,
    occurs,
)
from .util import chunked_map

# ---------------------------------------------------------------------- #
# independent oracles


def bfs_cluster_labels(config: Configuration) -> np.ndarray:
    """Breadth-first component labeling of the open subgraph (labeling oracle)."""
    w = config.window
    adj = [[] for _ in range(w.n_vertices)]
    for e in np.flatnonzero(config.open_):
        u = int(w.edge_lower[e])
        v = int(w.edge_upper[e])
        adj[u].append(v)
        adj[v].append(u)
    labels = np.full(w.n_vertices, -1, dtype=np.int64)
    nxt = 0
    for start in range(w.n_vertices):
        if labels[start] >= 0:
            continue
        labels[start] = nxt
        q = deque([start])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if labels[v] < 0:
                    labels[v] = nxt
                    q.append(v)
        nxt += 1
    return labels


def brute_force_l1_diameter(vertices) -> int:
    """Quadratic-pair oracle for the L1 diameter."""
    c = np.asarray(vertices, dtype=np.int64)
    if c.ndim == 1:
        c = c[None, :]
    if c.shape[0] == 0:
        raise ValueError("empty vertex set")
    diff = np.abs(c[:, None, :] - c[None, :, :]).sum(axis=2)
    return int(diff.max())


def bfs_animal_counts(d: int, mode: str, n_max: int) -> list:
    """Second enumerator for connected sets through the origin: level-by-level
    growth with canonical-set deduplication."""
    offsets = neighbor_offsets(d, mode)
    origin = (0,) * d
    level = {frozenset([origin])}
    counts = [1]
    for _ in range(2, n_max + 1):
        nxt = set()
        for s in level:
            for cell in s:
                for off in offsets:
                    nb = tuple(c + o for c, o in zip(cell, off))
                    if nb not in s:
                        nxt.add(s | {nb})
        counts.append(len(nxt))
        level = nxt
    return counts


def enumerate_partitions(n: int):
    """Yield all integer partitions of n in weakly decreasing order (oracle)."""

    def rec(remaining, largest, prefix):
        if remaining == 0:
            yield list(prefix)
            return
        for k in range(min(remaining, largest), 0, -1):
            prefix.append(k)
            yield from rec(remaining - k, k, prefix)
            prefix.pop()

    yield from rec(n, n, [])


def partition_count_by_enumeration(n: int) -> int:
    return sum(1 for _ in enumerate_partitions(n))


# ---------------------------------------------------------------------- #
# conditioned ensemble: randomized rectilinear moats


def _region_vertex_mask(window: LatticeWindow, region_boxes) -> np.ndarray:
    mask = np.zeros(window.n_vertices, dtype=bool)
    for b in region_boxes:
        mask[window.box_vertex_ids(b)] = True
    return mask


def close_region_surface(config: Configuration, region_boxes) -> Configuration:
    """Close every edge with exactly one endpoint in the boxes' vertex union."""
    w = config.window
    mask = _region_vertex_mask(w, region_boxes)
    surface = mask[w.edge_lower] ^ mask[w.edge_upper]
    bits = config.open_ & ~surface
    return config.replace_bits(bits)


def random_moat_region(window: LatticeWindow, rng: np.random.Generator,
                       max_extent: int | None = None,
                       bump_mean: float = 2.0) -> list:
    """A random rectilinear box region around the central box: a rectangle
    with geometric side lengths plus random one-box bumps on its faces.

    Bumps break the parity of the surrounding shell's size, so conditioned
    ensembles populate consecutive component sizes.
    """
    w = window
    cap = max_extent if max_extent is not None else max(1, w.R - 3)
    ext = np.minimum(rng.geometric(0.55, size=2 * w.d), cap)
    lo = -ext[:w.d]
    hi = ext[w.d:]
    region = {tuple(v) for v in np.stack(np.meshgrid(
        *[np.arange(l, h + 1) for l, h in zip(lo, hi)], indexing="ij"),
        axis=-1).reshape(-1, w.d)}
    n_bumps = int(rng.poisson(bump_mean))
    for _ in range(n_bumps):
        cells = sorted(region)
        base = cells[int(rng.integers(0, len(cells)))]
        axis = int(rng.integers(0, w.d))
        sign = 1 if rng.random() < 0.5 else -1
        bump = list(base)
        bump[axis] += sign
        if max(abs(c) for c in bump) <= cap:
            region.add(tuple(bump))
    return [np.array(b, dtype=np.int64) for b in sorted(region)]


def moat_mutator(extra_moat_prob: float = 0.3, max_extent: int | None = None,
                 bump_mean: float = 2.0):
    """Mutator closing one (sometimes two nested) random moats around the origin.

    Returns a callable (config -> config) keyed deterministically by the
    configuration's own (seed, sample_index).
    """

    def mutate(config: Configuration) -> Configuration:
        key = np.array([config.seed ^ 0x6D6F6174, config.sample_index], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        w = config.window
        region = random_moat_region(w, rng, max_extent, bump_mean)
        out = close_region_surface(config, region)
        if rng.random() < extra_moat_prob:
            inner_cap = max(abs(int(c)) for b in region for c in b)
            outer_cap = max(1, w.R - 3)
            if outer_cap >= inner_cap + 3:
                # nested second moat two box layers out: disjoint shells
                ext = inner_cap + 2 + int(rng.integers(0, outer_cap - inner_cap - 2))
                grid = np.stack(np.meshgrid(
                    *[np.arange(-ext, ext + 1)] * w.d, indexing="ij"),
                    axis=-1).reshape(-1, w.d)
                out = close_region_surface(out, [np.array(b) for b in grid])
        return out

    return mutate


# ---------------------------------------------------------------------- #
# structure suite


@dataclass
class StructureSuiteReport:
    window: dict
    p: float
    n_samples: int
    seed: int
    conditioned: bool
    n_finite: int = 0
    n_applicable: int = 0
    n_margin_excluded: int = 0
    n_phi_checked: int = 0
    n_star_components: int = 0
    n_occurring_total: int = 0
    violations: dict = field(default_factory=dict)
    reproducers: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def margin_rate(self) -> float:
        return self.n_margin_excluded / max(1, self.n_samples)

    def summary(self) -> dict:
        return {
            "window": self.window, "p": self.p, "n_samples": self.n_samples,
            "seed": self.seed, "conditioned": self.conditioned,
            "n_finite": self.n_finite, "n_applicable": self.n_applicable,
            "n_margin_excluded": self.n_margin_excluded,
            "margin_rate": self.margin_rate,
            "n_phi_checked": self.n_phi_checked,
            "n_star_components": self.n_star_components,
            "n_occurring_total": self.n_occurring_total,
            "violations": dict(self.violations),
            "reproducers": list(self.reproducers),
            "ok": self.ok,
        }


def _diagonal_components(window: LatticeWindow, flats: np.ndarray) -> list:
    rem = set(int(b) for b in flats)
    comps = []
    while rem:
        start = rem.pop()
        comp = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nb in _box_neighbor_flats(window, cur):
                if nb in rem:
                    rem.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(np.array(sorted(comp), dtype=np.int64))
    return comps


def check_configuration(config: Configuration, report: StructureSuiteReport,
                        tag) -> None:
    """Run every per-configuration invariant on one configuration."""

    def fail(name: str):
        report.violations[name] = report.violations.get(name, 0) + 1
        report.reproducers.append({"check": name, **tag})

    w = config.window
    lab = clusters(config)
    cl = BoxClassifier(config, lab)
    if int(lab.size.sum()) != w.n_vertices:
        fail("labeling_sizes_sum")
    o_label = lab.origin_label
    finite = not bool(lab.touches[o_label])
    report.n_finite += finite
    diam_ok = finite and 5 * lab.diameter(o_label) >= w.N
    try:
        occ = enumerate_occurring(config, lab, cl)
    except MarginViolation:
        report.n_margin_excluded += 1
        return
    report.n_occurring_total += len(occ)
    some = len(occ) > 0
    # exact case split of the finite-cluster event
    if finite != ((finite and not diam_ok) or (some and diam_ok)):
        fail("case_split_identity")
    # pairwise disjointness of occurring components
    all_boxes = [b for s in occ for b in s.boxes]
    if len(all_boxes) != len(set(all_boxes)):
        fail("occurring_disjointness")
    # signed subset identity
    k = len(occ)
    lhs = 1 if (some and diam_ok) else 0
    rhs = (1 - 0 ** k) if diam_ok else 0
    if lhs != rhs:
        fail("inclusion_exclusion_identity")
    if not diam_ok:
        return
    report.n_applicable += 1
    try:
        S = build_separating_component(config, lab, cl)
    except MarginViolation:
        report.n_margin_excluded += 1
        return
    except InvariantViolation:
        fail("separating_component_construction")
        return
    if S is None:
        fail("separating_component_missing")
        return
    # substantial boundary is connected once diagonals are added
    try:
        ss = substantial_set(int(lab.root[o_label]), config, lab, cl)
    except MarginViolation:
        report.n_margin_excluded += 1
        return
    if len(_diagonal_components(w, ss.boundary)) > 1:
        fail("boundary_diagonal_connectivity")
    if not np.isin(ss.boundary, S.boxes).all():
        fail("boundary_inside_component")
    try:
        if not occurs(S, config, cl):
            fail("built_component_occurs")
        cut = extract_cut(S, config, cl)
    except MarginViolation:
        report.n_margin_excluded += 1
        return
    except InvariantViolation:
        fail("cut_extraction_invariants")
        return
    if config.open_[cut.cut_edges].any():
        fail("cut_edges_closed")
    if not cut_separates_from_rim([w.origin_index], cut.cut_edges, w):
        fail("cut_separates_origin")
    if not any(np.array_equal(s.boxes, S.boxes) for s in occ):
        fail("built_component_enumerated")
    if lab.infinite_label >= 0:
        report.n_phi_checked += 1
        if touching_edge_count(config, lab) > cut.cut_edges.size:
            fail("touching_bounded_by_cut")
    for comp in _diagonal_components(w, S.boundary):
        report.n_star_components += 1
        try:
            if not check_star(comp, config, lab, cl):
                fail("unique_substantial_cluster")
        except ValueError:
            fail("boundary_component_not_good")


def run_structure_suite(window: LatticeWindow, p: float, n_samples: int,
                        seed: int = 0, conditioned: bool = False,
                        workers: int = 1) -> StructureSuiteReport:
    """Sample configurations and assert every structural invariant on each."""
    report = StructureSuiteReport(
        window=window.spec(), p=float(p), n_samples=int(n_samples),
        seed=int(seed), conditioned=bool(conditioned),
    )
    mutate = moat_mutator() if conditioned else None

    def run_chunk(lo, hi):
        local = StructureSuiteReport(
            window=window.spec(), p=float(p), n_samples=0, seed=int(seed),
            conditioned=bool(conditioned),
        )
        for i in range(lo, hi):
            config = sample(window, p, seed, i)
            if mutate is not None:
                config = mutate(config)
            check_configuration(
                config, local,
                {"window": window.spec(), "p": p, "seed": seed, "sample_index": i,
                 "conditioned": conditioned},
            )
        return local

    for local in chunked_map(run_chunk, n_samples, workers):
        report.n_finite += local.n_finite
        report.n_applicable += local.n_applicable
        report.n_margin_excluded += local.n_margin_excluded
        report.n_phi_checked += local.n_phi_checked
        report.n_star_components += local.n_star_components
        report.n_occurring_total += local.n_occurring_total
        for k, v in local.violations.items():
            report.violations[k] = report.violations.get(k, 0) + v
        report.reproducers.extend(local.reproducers)
    return report


def cut_violations(cut_edges: np.ndarray, config: Configuration) -> list:
    """Which cut invariants a configuration violates for the given edge set."""
    out = []
    if config.open_[np.asarray(cut_edges, dtype=np.int64)].any():
        out.append("cut_edges_closed")
    if not cut_separates_from_rim([config.window.origin_index], cut_edges, config.window):
        out.append("cut_separates_origin")
    return out


def run_negative_control(window: LatticeWindow, p: float = 0.9, seed: int = 21,
                         sample_index: int = 4) -> dict:
    """Inject a fault and confirm the invariant checks catch it.

    A separating component's cut is extracted, then one cut edge is flipped
    open; re-checking the cut against the tampered configuration must report
    violations.  Returns a report with the serialized reproducer.
    """
    config = moat_mutator(extra_moat_prob=0.0)(sample(window, p, seed, sample_index))
    lab = clusters(config)
    cl = BoxClassifier(config, lab)
    S = build_separating_component(config, lab, cl)
    if S is None:
        raise ValueError("configuration has no separating component to tamper with")
    cut = extract_cut(S, config, cl)
    bits = config.open_.copy()
    bits[int(cut.cut_edges[0])] = True
    tampered = config.replace_bits(bits)
    violations = cut_violations(cut.cut_edges, tampered)
    return {
        "ok": not violations,      # must be False: the fault was caught
        "violations": violations,
        "reproducer": {
            "window": window.spec(), "p": p, "seed": seed,
            "sample_index": sample_index, "flipped_edge": int(cut.cut_edges[0]),
        },
    }


# ---------------------------------------------------------------------- #
# expansion and counting suites


@dataclass
class SuiteReport:
    name: str
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> dict:
        return {"name": self.name, "ok": self.ok, "checks": dict(self.checks),
                "details": self.details}


def run_expansion_suite(seed: int = 0, n_samples: int = 400,
                        workers: int = 1) -> SuiteReport:
    """Polynomial, disk-bound and inclusion-exclusion checks at suite scale."""
    from .expansion import (
        disk_bound_sweep,
        empirical_expansion,
        exact_event_polynomial,
        geometric_decay_check,
    )

    rep = SuiteReport(name="expansion")
    # exhaustive tiny-event polynomial against a Monte Carlo estimate
    k_edges = 10
    predicate = lambda bits: bits[:, :4].sum(axis=1) >= 2  # any 2 of the first 4 open
    poly = exact_event_polynomial(k_edges, predicate)
    p0 = 0.37
    exact = poly.eval_real(p0)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 1], dtype=np.uint64)))
    n_mc = 200_000
    hits = int((rng.random((n_mc, 4)) < p0).sum(axis=1).__ge__(2).sum())
    se = np.sqrt(exact * (1 - exact) / n_mc)
    rep.checks["exhaustive_vs_monte_carlo"] = bool(abs(hits / n_mc - exact) <= 4 * se)
    rep.checks["probability_in_unit_interval"] = bool(0.0 <= exact <= 1.0)
    # randomized disk bound
    sweep = disk_bound_sweep(100_000, seed=seed)
    rep.checks["disk_bound_sweep"] = sweep.violations == 0
    rep.details["disk_bound"] = {"checked": sweep.checked, "violations": sweep.violations}
    # analytic decay input
    dec = geometric_decay_check(np.exp(-0.1 * np.arange(1, 21)))
    rep.checks["decay_analytic_pass"] = dec.passes and abs(dec.c_hat - np.exp(-0.1)) < 1e-6
    # conditioned empirical expansion: identity and signed-aggregate consistency
    w = LatticeWindow(2, 10, 7)
    agg = empirical_expansion(0.85, 10, w, n_max=40, n_samples=n_samples,
                              seed=seed, workers=workers,
                              mutator=moat_mutator())
    rep.checks["aggregate_matches_direct"] = bool(
        abs(agg.total - agg.direct) <= max(3 * agg.diff_se, 1e-12)
    )
    rep.checks["aggregate_decay"] = agg.decay is not None and agg.decay.passes
    rep.checks["aggregate_complexity"] = (
        agg.decay is not None and agg.decay.complexity_ok is True
    )
    rep.details["empirical_expansion"] = {
        "total": agg.total, "direct": agg.direct, "diff_se": agg.diff_se,
        "n_used": agg.n_used, "excluded": agg.n_excluded_margin,
        "decay_c_upper95": None if agg.decay is None else agg.decay.c_upper95,
    }
    return rep


def run_counting_suite(seed: int = 0, operating_point=(2, 10, 0.65),
                       n_samples: int = 2000, workers: int = 1) -> SuiteReport:
    """Counting oracles plus the composite decay-bound report."""
    from .counting import disjoint_packing, exp_dec_bound, partitions
    from .lattice import DIAGONAL
    from .renorm import good_probability

    rep = SuiteReport(name="counting")
    table = partitions(100)
    rep.checks["partition_oracle"] = all(
        table[n] == partition_count_by_enumeration(n) for n in range(21)
    )
    rep.checks["partition_spot_values"] = table[4] == 5 and table[10] == 42
    census = count_animals(2, "axis", 8)
    rep.checks["animals_second_enumerator"] = census.counts == bfs_animal_counts(2, "axis", 8)
    extra = {
        ("2", DIAGONAL): (count_animals(2, DIAGONAL, 6).counts, bfs_animal_counts(2, DIAGONAL, 6)),
        ("3", "axis"): (count_animals(3, "axis", 6).counts, bfs_animal_counts(3, "axis", 6)),
        ("3", DIAGONAL): (count_animals(3, DIAGONAL, 4).counts, bfs_animal_counts(3, DIAGONAL, 4)),
    }
    rep.checks["animals_other_modes"] = all(a == b for a, b in extra.values())
    # packing on random diagonally-connected sets
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 2], dtype=np.uint64)))
    w = LatticeWindow(2, 10, 12)
    pack_ok = True
    for _ in range(20):
        cells = {(0, 0)}
        while len(cells) < 50:
            base = list(cells)[int(rng.integers(0, len(cells)))]
            off = neighbor_offsets(2, DIAGONAL)[int(rng.integers(0, 8))]
            cells.add((base[0] + off[0], base[1] + off[1]))
        boxes = np.array(sorted(cells), dtype=np.int64)
        sub = disjoint_packing(boxes)
        if sub.shape[0] < -(-boxes.shape[0] // 4):
            pack_ok = False
        for i in range(sub.shape[0]):
            for j in range(i + 1, sub.shape[0]):
                if box_overlap(sub[i], sub[j], w).shape[0]:
                    pack_ok = False
    rep.checks["disjoint_packing"] = pack_ok
    # composite bound at the stated operating point, reported either way
    d, N, p = operating_point
    wd = LatticeWindow(d, N, 3)
    good = good_probability(p, N, wd, n_samples, seed=seed, workers=workers)
    c_hat = max(1e-12, min(1 - 1e-12, 1.0 - good.estimate))
    mu = count_animals(d, DIAGONAL, 7).mu_extrapolated
    bound = exp_dec_bound(10, c_hat, 2 ** d, 2 * mu, 13.0)
    rep.checks["composite_bound_reported"] = True
    rep.details["composite_bound"] = {
        "operating_point": {"d": d, "N": N, "p": p},
        "c_hat": c_hat, "mu_hat": mu, "M": 2 * mu, "k": 2 ** d,
        "M_c_to_1_over_k": float(2 * mu * c_hat ** (1.0 / 2 ** d)),
        "decays": bound.decays,
        "sensitivity": {
            "M=mu": float(mu * c_hat ** (1.0 / 2 ** d)),
            "M=4mu": float(4 * mu * c_hat ** (1.0 / 2 ** d)),
        },
    }
    return rep
