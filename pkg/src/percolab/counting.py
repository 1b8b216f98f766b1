"""Exact combinatorial machinery behind the expansion's decay bound: counts of
connected box sets through the origin, integer partitions, parity-class
packing of box sets into pairwise-disjoint subsets, and the composite bound
r^sqrt(n) * M^n * c^(n/k).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .lattice import AXIS, DIAGONAL
from .stats import weighted_line_fit


def neighbor_offsets(d: int, mode: str):
    if mode == AXIS:
        out = []
        for a in range(d):
            for s in (-1, 1):
                v = [0] * d
                v[a] = s
                out.append(tuple(v))
        return out
    if mode == DIAGONAL:
        return [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]
    raise ValueError(f"mode must be {AXIS!r} or {DIAGONAL!r}")


@dataclass
class AnimalCensus:
    """Exact counts of connected box sets of each size containing the origin."""

    d: int
    mode: str
    counts: list          # counts[n-1] = number of size-n sets through the origin
    ratios: list          # count(n)/count(n-1)
    mu_last: float        # last ratio; a growth-constant estimate, not a bound
    mu_extrapolated: float  # 1/n -> 0 extrapolation of the ratio sequence

    @property
    def n_max(self) -> int:
        return len(self.counts)

    def csv_rows(self):
        rows = []
        for n, c in enumerate(self.counts, start=1):
            r = self.ratios[n - 2] if n >= 2 else float("nan")
            rows.append((n, int(c), float(r)))
        return rows


def count_animals(d: int, mode: str, n_max: int, budget: int = 10 ** 8) -> AnimalCensus:
    """Exhaustive DFS enumeration of connected sets containing the origin.

    Each set is generated exactly once: candidates are consumed in order and
    cells skipped at a branch stay excluded below it.  The budget caps the
    total number of generated sets.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    offsets = neighbor_offsets(d, mode)
    origin = (0,) * d
    counts = [0] * n_max
    counts[0] = 1
    state = {"generated": 1}

    def neigh(cell):
        return [tuple(c + o for c, o in zip(cell, off)) for off in offsets]

    def rec(size, cands, seen):
        for i in range(len(cands)):
            c = cands[i]
            state["generated"] += 1
            if state["generated"] > budget:
                raise BudgetExceeded(f"enumeration exceeded {budget} sets")
            counts[size] += 1
            if size + 1 < n_max:
                fresh = [x for x in neigh(c) if x not in seen]
                seen.update(fresh)
                rec(size + 1, cands[i + 1:] + fresh, seen)
                seen.difference_update(fresh)

    if n_max >= 2:
        first = neigh(origin)
        rec(1, first, set([origin]) | set(first))
    ratios = [counts[n] / counts[n - 1] for n in range(1, n_max)]
    mu_last = ratios[-1] if ratios else float("nan")
    mu_ext = mu_last
    if len(ratios) >= 3:
        ns = np.arange(2, n_max + 1, dtype=np.float64)
        slope, intercept, _, _ = weighted_line_fit(1.0 / ns, np.array(ratios))
        mu_ext = float(intercept)
    return AnimalCensus(d=d, mode=mode, counts=counts, ratios=ratios,
                        mu_last=float(mu_last), mu_extrapolated=mu_ext)


# ---------------------------------------------------------------------- #
# integer partitions


@dataclass
class PartitionTable:
    """Exact partition counts p(0..n_max) as arbitrary-precision integers."""

    values: list

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n: int) -> int:
        return self.values[n]

    def fitted_r(self) -> float:
        """Smallest r with p(n) <= r^sqrt(n) across the whole table."""
        best = 1.0
        for n in range(1, self.n_max + 1):
            v = self.values[n]
            best = max(best, math.exp(_log_big(v) / math.sqrt(n)))
        return best

    def csv_rows(self):
        return [(n, str(self.values[n])) for n in range(self.n_max + 1)]


def _log_big(v: int) -> float:
    if v <= 0:
        return -math.inf
    bits = v.bit_length()
    if bits <= 900:
        return math.log(v)
    shift = bits - 900
    return math.log(v >> shift) + shift * math.log(2)


def _direct_partition_count(n: int) -> int:
    """Independent oracle: count partitions by bounded-largest-part recursion."""

    def rec(remaining, largest):
        if remaining == 0:
            return 1
        return sum(rec(remaining - k, k) for k in range(min(remaining, largest), 0, -1))

    return rec(n, n)


def partitions(n_max: int, crosscheck_upto: int = 20) -> PartitionTable:
    """Pentagonal-number recurrence:
    p(n) = sum_k (-1)^(k+1) [p(n - k(3k-1)/2) + p(n - k(3k+1)/2)].

    Cross-checked against direct enumeration for small n.
    """
    if not 0 <= n_max <= 10 ** 4:
        raise ValueError("n_max must lie in [0, 10^4]")
    values = [0] * (n_max + 1)
    values[0] = 1
    for n in range(1, n_max + 1):
        total = 0
        k = 1
        while True:
            g1 = k * (3 * k - 1) // 2
            g2 = k * (3 * k + 1) // 2
            if g1 > n and g2 > n:
                break
            sign = 1 if k % 2 == 1 else -1
            if g1 <= n:
                total += sign * values[n - g1]
            if g2 <= n:
                total += sign * values[n - g2]
            k += 1
        values[n] = total
    for n in range(min(crosscheck_upto, n_max) + 1):
        if values[n] != _direct_partition_count(n):
            raise AssertionError(f"partition recurrence disagrees with enumeration at n={n}")
    return PartitionTable(values=values)


# ---------------------------------------------------------------------- #
# disjoint packing and the composite bound


def disjoint_packing(boxes) -> np.ndarray:
    """Largest parity class of a box set: pairwise box-disjoint, size >= |S|/2^d.

    Boxes with all coordinates congruent mod 2 differ by at least 2 in some
    coordinate whenever distinct, so their boxes cannot intersect.
    """
    b = np.asarray(boxes, dtype=np.int64)
    if b.ndim == 1:
        b = b[None, :]
    if b.shape[0] == 0:
        raise ValueError("empty box set")
    d = b.shape[1]
    parity = (b % 2).astype(np.int64)
    keys = parity @ (1 << np.arange(d, dtype=np.int64))
    sizes = np.bincount(keys, minlength=1 << d)
    best = int(np.argmax(sizes))  # first maximum: deterministic tie-break
    return b[keys == best]


@dataclass
class BoundReport:
    n: int
    log_value: float
    value: float
    decays: bool           # M * c^(1/k) < 1; the bound eventually decreases
    asymptotic_rate: float  # log(M * c^(1/k)); negative iff decays


def exp_dec_bound(n: int, c: float, k: float, M: float, r: float) -> BoundReport:
    """r^sqrt(n) * M^n * c^(n/k), evaluated in the log domain."""
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if M <= 1 or r <= 1 or k < 1:
        raise ValueError("need M > 1, r > 1, k >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    log_value = math.sqrt(n) * math.log(r) + n * math.log(M) + (n / k) * math.log(c)
    rate = math.log(M) + math.log(c) / k
    return BoundReport(
        n=int(n), log_value=float(log_value),
        value=float(math.exp(min(log_value, 700.0))),
        decays=bool(rate < 0), asymptotic_rate=float(rate),
    )
